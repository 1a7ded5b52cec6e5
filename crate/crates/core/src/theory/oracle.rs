//! Cross-check between the protocol engine and exact enumeration: the same
//! tabular agents are played through [`run_trial`](crate::protocol::run_trial)
//! and enumerated.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::construct::{random_distinguisher, random_interlocutor};
use super::enumerate::{EnumError, Policy, exact_gtt_success};
use crate::agents::{PureModel, PureRoster, SymbolNames, TabularModel};
use crate::analytics::BranchCounts;
use crate::protocol::{FixedClock, ProtocolVariant, TrialConfig, run_trial};
use crate::seed;
use crate::tabular::TabularAgent;

/// Two-turn game between synthetic models `a` (actor) and `b` (target and
/// judge).
#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub alphabet: u16,
    pub actor: Arc<TabularAgent>,
    pub target: Arc<TabularAgent>,
    pub judge: Arc<TabularAgent>,
}

pub const ORACLE_HORIZON: usize = 2;

impl OracleInstance {
    /// Alphabet of 2 or 3 messages, interlocutor depth 1 or 2, and a judge
    /// that answers in its opening message up to 30% of the time.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let k = rng.random_range(2..=3);
        let depth = rng.random_range(1..=2);
        OracleInstance {
            alphabet: k,
            actor: Arc::new(random_interlocutor(rng, k, depth)),
            target: Arc::new(random_interlocutor(rng, k, depth)),
            judge: Arc::new(random_distinguisher(rng, k, 0.3)),
        }
    }

    pub fn exact(&self) -> Result<f64, EnumError> {
        exact_gtt_success(
            &Policy::Table(self.actor.clone()),
            &Policy::Table(self.target.clone()),
            &Policy::Table(self.judge.clone()),
            ORACLE_HORIZON,
        )
    }

    pub fn roster(&self) -> PureRoster {
        let mut r = PureRoster::new().with_symbols(SymbolNames::numbered(self.alphabet));
        r.insert(
            "a",
            PureModel::Tabular(TabularModel { imitating_any: Some(self.actor.clone()), ..Default::default() }),
        );
        r.insert(
            "b",
            PureModel::Tabular(TabularModel {
                as_self: Some(self.target.clone()),
                as_distinguisher: Some(self.judge.clone()),
                imitating: BTreeMap::new(),
                imitating_any: None,
            }),
        );
        r
    }

    /// Plays `trials` protocol trials with fair-coin secrets. Trials with a
    /// backend failure are counted as unparseable.
    pub fn simulate(&self, trials: u64, base_seed: u64) -> BranchCounts {
        let mut roster = self.roster();
        let clock = FixedClock::default();
        let mut counts = BranchCounts::default();
        let variant = ProtocolVariant::gtt("a", "b");
        let mut config = TrialConfig::new("", variant, 0);
        config.max_distinguisher_turns = ORACLE_HORIZON as u32;
        for t in 0..trials {
            config.rng_seed = seed::derive(base_seed, &[t]);
            config.trial_id = format!("{t}");
            let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
            let rec = run_trial(&config, &mut roster, &clock, &mut rng).expect("valid config");
            if rec.failure.is_some() {
                counts.unparseable += 1;
            } else {
                counts.add(rec.secret_identity, rec.parsed);
            }
        }
        counts
    }
}
