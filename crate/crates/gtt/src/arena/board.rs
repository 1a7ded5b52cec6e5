//! Append-only session store and the leaderboard derived from it.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use gtt_core::protocol::{RecordSource, SecretIdentity, TrialRecord};
use serde::{Deserialize, Serialize};

use super::session::Mode;

/// One finished session, stored as a JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArenaEntry {
    pub session_id: String,
    pub record: TrialRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectKind {
    Human,
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub subject: String,
    pub kind: SubjectKind,
    pub games: u64,
    pub successes: u64,
    pub distinguishing_games: u64,
    pub distinguishing_successes: u64,
    pub fooling_games: u64,
    pub fooling_successes: u64,
    /// ½·fooling rate + ½·distinguishing rate; a single rate when only one
    /// kind of game was played.
    pub score: f64,
}

pub const ANONYMOUS: &str = "anonymous";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Leaderboard {
    entries: BTreeMap<(SubjectKind, String), LeaderboardEntry>,
}

impl Leaderboard {
    fn slot(&mut self, kind: SubjectKind, subject: &str) -> &mut LeaderboardEntry {
        self.entries.entry((kind, subject.to_string())).or_insert_with(|| LeaderboardEntry {
            subject: subject.to_string(),
            kind,
            games: 0,
            successes: 0,
            distinguishing_games: 0,
            distinguishing_successes: 0,
            fooling_games: 0,
            fooling_successes: 0,
            score: 0.0,
        })
    }

    fn game(&mut self, kind: SubjectKind, subject: &str, distinguishing: bool, won: bool) {
        let e = self.slot(kind, subject);
        e.games += 1;
        e.successes += u64::from(won);
        if distinguishing {
            e.distinguishing_games += 1;
            e.distinguishing_successes += u64::from(won);
        } else {
            e.fooling_games += 1;
            e.fooling_successes += u64::from(won);
        }
        let rate = |s: u64, g: u64| (g > 0).then(|| s as f64 / g as f64);
        e.score = match (rate(e.fooling_successes, e.fooling_games), rate(e.distinguishing_successes, e.distinguishing_games)) {
            (Some(f), Some(d)) => 0.5 * f + 0.5 * d,
            (Some(x), None) | (None, Some(x)) => x,
            (None, None) => 0.0,
        };
    }

    /// Credits one finished arena record. Records without a verdict are
    /// ignored.
    pub fn record(&mut self, r: &TrialRecord) {
        let (Some(success), RecordSource::Arena { mode, handle }) = (r.success, &r.source) else {
            return;
        };
        let human = handle.as_deref().unwrap_or(ANONYMOUS);
        let v = &r.config.variant;
        if mode == Mode::HumanDistinguisher.as_str() {
            self.game(SubjectKind::Human, human, true, success);
            if r.secret_identity == SecretIdentity::Imitator {
                self.game(SubjectKind::Model, &v.actor, false, !success);
            }
        } else if mode == Mode::HumanActor.as_str() {
            self.game(SubjectKind::Human, human, false, !success);
            self.game(SubjectKind::Model, v.distinguisher_model(), true, success);
        }
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a TrialRecord>) -> Self {
        let mut b = Leaderboard::default();
        for r in records {
            b.record(r);
        }
        b
    }

    /// Score descending, then subject, then kind.
    pub fn ranked(&self) -> Vec<LeaderboardEntry> {
        let mut v: Vec<LeaderboardEntry> = self.entries.values().cloned().collect();
        v.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.subject.cmp(&b.subject)).then(a.kind.cmp(&b.kind)));
        v
    }

    pub fn total_games(&self) -> u64 {
        self.entries.values().map(|e| e.games).sum()
    }
}

/// JSONL file of [`ArenaEntry`] lines.
#[derive(Debug)]
pub struct ArenaStore {
    path: PathBuf,
    file: File,
}

impl ArenaStore {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        if let Some(p) = path.parent() {
            if !p.as_os_str().is_empty() {
                std::fs::create_dir_all(p)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(ArenaStore { path: path.to_path_buf(), file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, e: &ArenaEntry) -> std::io::Result<()> {
        let mut line = serde_json::to_vec(e).map_err(std::io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()
    }

    /// Reads every entry; unparsable lines are reported by line number.
    pub fn read_all(path: &Path) -> std::io::Result<(Vec<ArenaEntry>, Vec<usize>)> {
        if !path.exists() {
            return Ok((Vec::new(), Vec::new()));
        }
        let mut good = Vec::new();
        let mut bad = Vec::new();
        for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line) {
                Ok(e) => good.push(e),
                Err(_) => bad.push(i + 1),
            }
        }
        Ok((good, bad))
    }
}
