//! Single-file SQLite storage for the journal.

use std::path::Path;

use rusqlite::{params, Connection, OptionalExtension};

use crate::event::{JournalRecord, JOURNAL_FORMAT, JOURNAL_VERSION};
use crate::RegistryError;

/// Schema migrations, applied in order. `PRAGMA user_version` holds the
/// number of applied steps.
const MIGRATIONS: &[&str] = &[
    "CREATE TABLE meta (key TEXT PRIMARY KEY, value TEXT NOT NULL);
     CREATE TABLE journal (
         seq INTEGER PRIMARY KEY,
         at TEXT NOT NULL,
         actor TEXT NOT NULL,
         event TEXT NOT NULL
     );",
    "ALTER TABLE journal ADD COLUMN kind TEXT NOT NULL DEFAULT '';
     CREATE INDEX journal_kind ON journal (kind);",
];

pub(crate) struct SqliteJournal {
    conn: Connection,
}

fn storage(e: rusqlite::Error) -> RegistryError {
    RegistryError::Storage(e.to_string())
}

impl SqliteJournal {
    pub(crate) fn open(path: &Path, schema_version: u32) -> Result<SqliteJournal, RegistryError> {
        let mut conn = Connection::open(path).map_err(storage)?;
        conn.pragma_update(None, "journal_mode", "WAL").map_err(storage)?;
        migrate(&mut conn)?;
        let journal = SqliteJournal { conn };
        journal.check_meta(schema_version)?;
        Ok(journal)
    }

    fn check_meta(&self, schema_version: u32) -> Result<(), RegistryError> {
        let get = |key: &str| -> Result<Option<String>, RegistryError> {
            self.conn
                .query_row("SELECT value FROM meta WHERE key = ?1", [key], |r| r.get(0))
                .optional()
                .map_err(storage)
        };
        match get("format")? {
            None => {
                let tx = self.conn.unchecked_transaction().map_err(storage)?;
                for (k, v) in [
                    ("format", JOURNAL_FORMAT.to_string()),
                    ("format_version", JOURNAL_VERSION.to_string()),
                    ("schema_version", schema_version.to_string()),
                ] {
                    tx.execute("INSERT INTO meta (key, value) VALUES (?1, ?2)", params![k, v])
                        .map_err(storage)?;
                }
                tx.commit().map_err(storage)?;
            }
            Some(format) if format != JOURNAL_FORMAT => {
                return Err(RegistryError::Storage(format!("not a registry file ({format})")));
            }
            Some(_) => {
                let stored: u32 = get("schema_version")?
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| RegistryError::Storage("schema version missing".into()))?;
                if stored != schema_version {
                    return Err(RegistryError::SchemaMismatch {
                        stored,
                        active: schema_version,
                    });
                }
            }
        }
        Ok(())
    }

    pub(crate) fn load(&self) -> Result<Vec<JournalRecord>, RegistryError> {
        let mut stmt = self
            .conn
            .prepare("SELECT seq, event FROM journal ORDER BY seq")
            .map_err(storage)?;
        let rows = stmt
            .query_map([], |r| Ok((r.get::<_, i64>(0)?, r.get::<_, String>(1)?)))
            .map_err(storage)?;
        let mut out = Vec::new();
        for row in rows {
            let (seq, text) = row.map_err(storage)?;
            let record: JournalRecord =
                serde_json::from_str(&text).map_err(|e| RegistryError::CorruptJournal {
                    seq: seq as u64,
                    reason: e.to_string(),
                })?;
            out.push(record);
        }
        Ok(out)
    }

    pub(crate) fn append(&mut self, records: &[JournalRecord]) -> Result<(), RegistryError> {
        let tx = self.conn.transaction().map_err(storage)?;
        for r in records {
            let text = serde_json::to_string(r).expect("record serializes");
            tx.execute(
                "INSERT INTO journal (seq, at, actor, event, kind) VALUES (?1, ?2, ?3, ?4, ?5)",
                params![r.seq as i64, r.at.to_rfc3339(), r.actor, text, r.event.name()],
            )
            .map_err(storage)?;
        }
        tx.commit().map_err(storage)
    }
}

fn migrate(conn: &mut Connection) -> Result<(), RegistryError> {
    let applied: usize = conn
        .pragma_query_value(None, "user_version", |r| r.get::<_, i64>(0))
        .map_err(storage)? as usize;
    if applied > MIGRATIONS.len() {
        return Err(RegistryError::Storage(format!(
            "registry file is from a newer release (schema step {applied})"
        )));
    }
    for (step, sql) in MIGRATIONS.iter().enumerate().skip(applied) {
        let tx = conn.transaction().map_err(storage)?;
        tx.execute_batch(sql).map_err(storage)?;
        tx.pragma_update(None, "user_version", (step + 1) as i64)
            .map_err(storage)?;
        tx.commit().map_err(storage)?;
        tracing::info!(step = step + 1, "applied registry migration");
    }
    Ok(())
}
