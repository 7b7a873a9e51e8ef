//! Event log: JSONL file, in-memory history and live fan-out.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Mutex, RwLock};

use tokio::sync::broadcast;

use meter_core::event::EventRecord;

pub struct EventHub {
    history: RwLock<Vec<EventRecord>>,
    file: Mutex<File>,
    tx: broadcast::Sender<EventRecord>,
}

impl EventHub {
    /// Opens (or creates) the log and loads its existing records.
    pub fn open(path: &Path) -> anyhow::Result<Self> {
        let mut history = Vec::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: EventRecord = serde_json::from_str(&line)
                    .map_err(|e| anyhow::anyhow!("{} line {}: {e}", path.display(), i + 1))?;
                history.push(rec);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let (tx, _) = broadcast::channel(1024);
        Ok(EventHub { history: RwLock::new(history), file: Mutex::new(file), tx })
    }

    pub fn next_seq(&self) -> u64 {
        self.history.read().unwrap().last().map_or(0, |e| e.seq + 1)
    }

    pub fn last_t(&self) -> f64 {
        self.history.read().unwrap().last().map_or(0.0, |e| e.t)
    }

    /// Single writer only: records must arrive in sequence order.
    pub fn append(&self, records: Vec<EventRecord>) -> io::Result<()> {
        if records.is_empty() {
            return Ok(());
        }
        let mut buf = String::new();
        for r in &records {
            buf.push_str(&serde_json::to_string(r).expect("event serializes"));
            buf.push('\n');
        }
        self.file.lock().unwrap().write_all(buf.as_bytes())?;
        let mut history = self.history.write().unwrap();
        for r in records {
            history.push(r.clone());
            // no subscribers is fine
            let _ = self.tx.send(r);
        }
        Ok(())
    }

    /// Records with `seq > since`, or everything.
    pub fn since(&self, since: Option<u64>) -> Vec<EventRecord> {
        let history = self.history.read().unwrap();
        let start = match since {
            Some(s) => history.partition_point(|e| e.seq <= s),
            None => 0,
        };
        history[start..].to_vec()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<EventRecord> {
        self.tx.subscribe()
    }
}
