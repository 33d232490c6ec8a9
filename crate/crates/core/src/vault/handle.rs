use std::collections::VecDeque;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;

use log::{debug, warn};
use serde::Serialize;

use super::index::{self, random_stored_name, validate_name, EntryState, VaultEntry};
use super::meta::{KdfParams, VaultMeta};
use super::stream::{decrypt_bytes, decrypt_stream, encrypt_bytes, encrypt_stream, FileHeader};
use super::VaultError;

pub const META_FILE: &str = "vault.meta";
pub const INDEX_FILE: &str = "index.dsi";
pub const LOCK_FILE: &str = ".dsv.lock";
pub const LOCKED_DIR: &str = "locked";
pub const OPEN_DIR: &str = "open";
const STAGING_SUFFIX: &str = ".part";

/// Called from the worker after each chunk with the entry name and the
/// number of plaintext bytes processed so far.
pub type ProgressHook = Arc<dyn Fn(&str, u64) + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Lock,
    Unlock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueuedTask {
    pub id: u64,
    pub name: String,
    pub direction: Direction,
}

#[derive(Debug, Clone)]
struct Task {
    queued: QueuedTask,
    /// Outside file to take in; only for locks of new entries.
    source: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskOutcome {
    pub task: QueuedTask,
    pub result: Result<(), VaultError>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatusRow {
    pub original_name: String,
    /// `None` for a file queued for locking that is not in the vault yet.
    pub state: Option<EntryState>,
    pub pending: Option<Direction>,
    pub size_plain: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct Status {
    pub entries: Vec<StatusRow>,
    pub locked: usize,
    pub unlocked: usize,
    pub processing: usize,
    pub pending: usize,
}

struct State {
    index: Vec<VaultEntry>,
    pending: VecDeque<Task>,
    current: Option<Task>,
    finished: Vec<TaskOutcome>,
    next_id: u64,
    shutdown: bool,
}

impl State {
    fn queued_for(&self, name: &str) -> bool {
        self.current.iter().chain(&self.pending).any(|t| t.queued.name == name)
    }

    fn entry(&self, name: &str) -> Option<&VaultEntry> {
        self.index.iter().find(|e| e.original_name == name)
    }

    fn push(&mut self, name: &str, direction: Direction, source: Option<PathBuf>) -> QueuedTask {
        self.next_id += 1;
        let queued = QueuedTask {
            id: self.next_id,
            name: name.to_owned(),
            direction,
        };
        self.pending.push_back(Task {
            queued: queued.clone(),
            source,
        });
        queued
    }
}

struct Shared {
    dir: PathBuf,
    key: [u8; 32],
    state: Mutex<State>,
    changed: Condvar,
    hook: Option<ProgressHook>,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn locked_path(&self, stored: &str) -> PathBuf {
        self.dir.join(LOCKED_DIR).join(stored)
    }

    fn open_path(&self, name: &str) -> PathBuf {
        self.dir.join(OPEN_DIR).join(name)
    }

    fn save_index(&self, entries: &[VaultEntry]) -> Result<(), VaultError> {
        let ct = encrypt_bytes(&self.key, &index::encode(entries));
        write_atomic(&self.dir.join(INDEX_FILE), &ct)
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> VaultError + '_ {
    move |e| VaultError::Io {
        offset: None,
        message: format!("{}: {e}", path.display()),
    }
}

fn staging(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(STAGING_SUFFIX);
    PathBuf::from(s)
}

fn write_atomic(path: &Path, data: &[u8]) -> Result<(), VaultError> {
    let tmp = staging(path);
    let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(data).and_then(|_| f.sync_all()).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Runs `fill` against a staging file next to `dest` and renames it into
/// place only on success, so `dest` is never seen half-written.
fn produce(dest: &Path, fill: impl FnOnce(&mut BufWriter<File>) -> Result<(), VaultError>) -> Result<(), VaultError> {
    let tmp = staging(dest);
    let result = (|| {
        let mut out = BufWriter::new(File::create(&tmp).map_err(io_err(&tmp))?);
        fill(&mut out)?;
        let f = out.into_inner().map_err(|e| io_err(&tmp)(e.into_error()))?;
        f.sync_all().map_err(io_err(&tmp))?;
        fs::rename(&tmp, dest).map_err(io_err(dest))
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn pid_alive(pid: u32) -> bool {
    let proc_root = Path::new("/proc");
    !proc_root.is_dir() || proc_root.join(pid.to_string()).exists()
}

fn acquire_owner_lock(dir: &Path) -> Result<PathBuf, VaultError> {
    let path = dir.join(LOCK_FILE);
    for _ in 0..2 {
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                f.write_all(std::process::id().to_string().as_bytes())
                    .map_err(io_err(&path))?;
                return Ok(path);
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                let owner = fs::read_to_string(&path).unwrap_or_default();
                match owner.trim().parse::<u32>() {
                    Ok(pid) if pid_alive(pid) => return Err(VaultError::VaultBusy(pid)),
                    _ => {
                        warn!("removing stale vault lock {}", path.display());
                        fs::remove_file(&path).map_err(io_err(&path))?;
                    }
                }
            }
            Err(e) => return Err(io_err(&path)(e)),
        }
    }
    Err(VaultError::VaultBusy(0))
}

/// An open vault with its background worker.
///
/// Requests are queued and carried out one at a time, in submission order,
/// by a single worker thread. Dropping the handle discards pending tasks,
/// lets the in-flight one finish and releases the directory.
pub struct Vault {
    shared: Arc<Shared>,
    worker: Option<JoinHandle<()>>,
    owner_lock: PathBuf,
}

impl std::fmt::Debug for Vault {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Vault").field("dir", &self.shared.dir).finish()
    }
}

impl Vault {
    /// Creates a vault in `dir`, which must be absent or empty.
    pub fn init(dir: &Path, pin: &str, kdf: KdfParams) -> Result<VaultMeta, VaultError> {
        if dir.join(META_FILE).exists() {
            return Err(VaultError::VaultExists);
        }
        if dir.exists() && fs::read_dir(dir).map_err(io_err(dir))?.next().is_some() {
            return Err(VaultError::VaultExists);
        }
        let (meta, key) = VaultMeta::create(pin, kdf)?;
        for sub in [LOCKED_DIR, OPEN_DIR] {
            fs::create_dir_all(dir.join(sub)).map_err(io_err(dir))?;
        }
        write_atomic(&dir.join(INDEX_FILE), &encrypt_bytes(&key, &[]))?;
        write_atomic(&dir.join(META_FILE), &meta.to_bytes())?;
        Ok(meta)
    }

    pub fn open(dir: &Path, pin: &str) -> Result<Self, VaultError> {
        Self::open_with_hook(dir, pin, None)
    }

    pub fn open_with_hook(dir: &Path, pin: &str, hook: Option<ProgressHook>) -> Result<Self, VaultError> {
        let meta_path = dir.join(META_FILE);
        if !meta_path.is_file() {
            return Err(VaultError::NoVault);
        }
        let meta = VaultMeta::parse(&fs::read(&meta_path).map_err(io_err(&meta_path))?)?;
        let key = meta.unlock(pin)?;
        let index_path = dir.join(INDEX_FILE);
        let index = index::decode(&decrypt_bytes(
            &key,
            &fs::read(&index_path).map_err(io_err(&index_path))?,
        )?)?;
        let owner_lock = acquire_owner_lock(dir)?;

        let shared = Arc::new(Shared {
            dir: dir.to_path_buf(),
            key,
            state: Mutex::new(State {
                index,
                pending: VecDeque::new(),
                current: None,
                finished: Vec::new(),
                next_id: 0,
                shutdown: false,
            }),
            changed: Condvar::new(),
            hook,
        });
        let worker_shared = Arc::clone(&shared);
        let worker = std::thread::Builder::new()
            .name("vault-worker".into())
            .spawn(move || worker_loop(&worker_shared))
            .map_err(|e| VaultError::Io {
                offset: None,
                message: format!("spawning worker: {e}"),
            })?;
        Ok(Self {
            shared,
            worker: Some(worker),
            owner_lock,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.shared.dir
    }

    /// Queues `path` for encryption into the vault under its file name.
    pub fn lock_file(&self, path: &Path) -> Result<QueuedTask, VaultError> {
        let missing = || VaultError::SourceMissing(path.display().to_string());
        if !path.is_file() {
            return Err(missing());
        }
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(missing)?
            .to_owned();
        validate_name(&name)?;
        let source = fs::canonicalize(path).map_err(|_| missing())?;
        let mut st = self.shared.lock();
        if st.entry(&name).is_some() || st.queued_for(&name) {
            return Err(VaultError::DuplicateName(name));
        }
        let task = st.push(&name, Direction::Lock, Some(source));
        self.shared.changed.notify_all();
        Ok(task)
    }

    /// Queues decryption of a locked entry into `open/`.
    pub fn unlock_file(&self, name: &str) -> Result<QueuedTask, VaultError> {
        let mut st = self.shared.lock();
        if st.queued_for(name) {
            return Err(VaultError::AlreadyQueued(name.to_owned()));
        }
        match st.entry(name) {
            None => return Err(VaultError::EntryNotFound(name.to_owned())),
            Some(e) if e.state != EntryState::Locked => return Err(VaultError::NotLocked(name.to_owned())),
            Some(_) => {}
        }
        let task = st.push(name, Direction::Unlock, None);
        self.shared.changed.notify_all();
        Ok(task)
    }

    /// Queues re-encryption of one unlocked entry from its `open/` copy.
    pub fn relock(&self, name: &str) -> Result<QueuedTask, VaultError> {
        let mut st = self.shared.lock();
        if st.queued_for(name) {
            return Err(VaultError::AlreadyQueued(name.to_owned()));
        }
        match st.entry(name) {
            None => return Err(VaultError::EntryNotFound(name.to_owned())),
            Some(e) if e.state != EntryState::Unlocked => return Err(VaultError::NotUnlocked(name.to_owned())),
            Some(_) => {}
        }
        let task = st.push(name, Direction::Lock, None);
        self.shared.changed.notify_all();
        Ok(task)
    }

    /// Queues a lock for every unlocked entry not already queued, in index
    /// order. Returns how many were queued.
    pub fn lock_all(&self) -> usize {
        let mut st = self.shared.lock();
        let names: Vec<String> = st
            .index
            .iter()
            .filter(|e| e.state == EntryState::Unlocked)
            .map(|e| e.original_name.clone())
            .collect();
        let mut n = 0;
        for name in names {
            if !st.queued_for(&name) {
                st.push(&name, Direction::Lock, None);
                n += 1;
            }
        }
        self.shared.changed.notify_all();
        n
    }

    /// Empties the queue. The in-flight task, if any, runs to completion.
    /// Returns the number of tasks discarded.
    pub fn cancel(&self) -> usize {
        let mut st = self.shared.lock();
        let n = st.pending.len();
        st.pending.clear();
        self.shared.changed.notify_all();
        n
    }

    /// Deletes a locked entry's ciphertext and forgets it.
    pub fn destroy_entry(&self, name: &str) -> Result<(), VaultError> {
        let mut st = self.shared.lock();
        if st.queued_for(name) {
            return Err(VaultError::AlreadyQueued(name.to_owned()));
        }
        let pos = st
            .index
            .iter()
            .position(|e| e.original_name == name)
            .ok_or_else(|| VaultError::EntryNotFound(name.to_owned()))?;
        if st.index[pos].state != EntryState::Locked {
            return Err(VaultError::NotLocked(name.to_owned()));
        }
        let mut remaining = st.index.clone();
        let entry = remaining.remove(pos);
        self.shared.save_index(&remaining)?;
        st.index = remaining;
        let path = self.shared.locked_path(&entry.stored_name);
        fs::remove_file(&path).map_err(io_err(&path))
    }

    /// Index entries with live states.
    pub fn entries(&self) -> Vec<VaultEntry> {
        let st = self.shared.lock();
        let busy = st.current.as_ref().map(|t| t.queued.name.clone());
        st.index
            .iter()
            .cloned()
            .map(|mut e| {
                if busy.as_deref() == Some(e.original_name.as_str()) {
                    e.state = EntryState::Processing;
                }
                e
            })
            .collect()
    }

    pub fn status(&self) -> Status {
        let st = self.shared.lock();
        let pending_for = |name: &str| {
            st.pending
                .iter()
                .find(|t| t.queued.name == name)
                .map(|t| t.queued.direction)
        };
        let busy = st.current.as_ref().map(|t| t.queued.name.as_str());
        let mut rows: Vec<StatusRow> = st
            .index
            .iter()
            .map(|e| StatusRow {
                original_name: e.original_name.clone(),
                state: Some(if busy == Some(e.original_name.as_str()) {
                    EntryState::Processing
                } else {
                    e.state
                }),
                pending: pending_for(&e.original_name),
                size_plain: Some(e.size_plain),
            })
            .collect();
        for t in st.current.iter().chain(&st.pending) {
            if t.source.is_some() {
                let in_flight = st.current.as_ref().map(|c| c.queued.id) == Some(t.queued.id);
                rows.push(StatusRow {
                    original_name: t.queued.name.clone(),
                    state: in_flight.then_some(EntryState::Processing),
                    pending: (!in_flight).then_some(Direction::Lock),
                    size_plain: t.source.as_ref().and_then(|p| fs::metadata(p).ok()).map(|m| m.len()),
                });
            }
        }
        let count = |s: EntryState| rows.iter().filter(|r| r.state == Some(s)).count();
        Status {
            locked: count(EntryState::Locked),
            unlocked: count(EntryState::Unlocked),
            processing: count(EntryState::Processing),
            pending: st.pending.len(),
            entries: rows,
        }
    }

    /// Tasks waiting behind the in-flight one, in order.
    pub fn pending(&self) -> Vec<QueuedTask> {
        self.shared.lock().pending.iter().map(|t| t.queued.clone()).collect()
    }

    pub fn in_flight(&self) -> Option<QueuedTask> {
        self.shared.lock().current.as_ref().map(|t| t.queued.clone())
    }

    /// Blocks until the queue is empty and no task is running.
    pub fn wait_idle(&self) {
        let mut st = self.shared.lock();
        while st.current.is_some() || !st.pending.is_empty() {
            st = self.shared.changed.wait(st).unwrap_or_else(|p| p.into_inner());
        }
    }

    /// Completed tasks since the last call, in completion order.
    pub fn take_outcomes(&self) -> Vec<TaskOutcome> {
        std::mem::take(&mut self.shared.lock().finished)
    }

    /// Drains the queue, then stops the worker and releases the directory.
    pub fn close(self) -> Vec<TaskOutcome> {
        self.wait_idle();
        self.take_outcomes()
    }
}

impl Drop for Vault {
    fn drop(&mut self) {
        {
            let mut st = self.shared.lock();
            st.shutdown = true;
            st.pending.clear();
            self.shared.changed.notify_all();
        }
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
        let _ = fs::remove_file(&self.owner_lock);
    }
}

fn worker_loop(shared: &Shared) {
    loop {
        let task = {
            let mut st = shared.lock();
            while st.pending.is_empty() && !st.shutdown {
                st = shared.changed.wait(st).unwrap_or_else(|p| p.into_inner());
            }
            if st.shutdown {
                return;
            }
            let task = st.pending.pop_front().expect("non-empty");
            st.current = Some(task.clone());
            shared.changed.notify_all();
            task
        };
        debug!("task {} {:?} {}", task.queued.id, task.queued.direction, task.queued.name);
        let result = run_task(shared, &task);
        if let Err(e) = &result {
            warn!("task {} on {} failed: {e}", task.queued.id, task.queued.name);
        }
        let mut st = shared.lock();
        st.current = None;
        st.finished.push(TaskOutcome {
            task: task.queued,
            result,
        });
        shared.changed.notify_all();
    }
}

fn progress_for<'a>(shared: &'a Shared, name: &'a str) -> impl FnMut(u64) + 'a {
    move |done| {
        if let Some(h) = &shared.hook {
            h(name, done)
        }
    }
}

fn encrypt_file(shared: &Shared, name: &str, src: &Path, dest: &Path) -> Result<u64, VaultError> {
    let len = fs::metadata(src).map_err(|_| VaultError::SourceMissing(src.display().to_string()))?.len();
    let mut input = BufReader::new(File::open(src).map_err(|_| VaultError::SourceMissing(src.display().to_string()))?);
    produce(dest, |out| {
        encrypt_stream(&shared.key, &FileHeader::new(len), &mut input, out, progress_for(shared, name))
    })?;
    Ok(len)
}

/// Commits an index change: saved to disk first, then made visible.
fn commit(shared: &Shared, change: impl FnOnce(&mut Vec<VaultEntry>)) -> Result<(), VaultError> {
    let mut st = shared.lock();
    let mut next = st.index.clone();
    change(&mut next);
    shared.save_index(&next)?;
    st.index = next;
    Ok(())
}

fn run_task(shared: &Shared, task: &Task) -> Result<(), VaultError> {
    let name = task.queued.name.as_str();
    match (&task.source, task.queued.direction) {
        (Some(src), _) => {
            let stored = {
                let st = shared.lock();
                loop {
                    let candidate = random_stored_name();
                    if st.index.iter().all(|e| e.stored_name != candidate) {
                        break candidate;
                    }
                }
            };
            let dest = shared.locked_path(&stored);
            let size = encrypt_file(shared, name, src, &dest)?;
            let entry = VaultEntry {
                original_name: name.to_owned(),
                stored_name: stored,
                size_plain: size,
                state: EntryState::Locked,
            };
            if let Err(e) = commit(shared, |idx| idx.push(entry)) {
                let _ = fs::remove_file(&dest);
                return Err(e);
            }
            fs::remove_file(src).map_err(io_err(src))
        }
        (None, Direction::Lock) => {
            let stored = shared
                .lock()
                .entry(name)
                .map(|e| e.stored_name.clone())
                .ok_or_else(|| VaultError::EntryNotFound(name.to_owned()))?;
            let open = shared.open_path(name);
            let size = encrypt_file(shared, name, &open, &shared.locked_path(&stored))?;
            commit(shared, |idx| {
                if let Some(e) = idx.iter_mut().find(|e| e.original_name == name) {
                    e.state = EntryState::Locked;
                    e.size_plain = size;
                }
            })?;
            fs::remove_file(&open).map_err(io_err(&open))
        }
        (None, Direction::Unlock) => {
            let stored = shared
                .lock()
                .entry(name)
                .map(|e| e.stored_name.clone())
                .ok_or_else(|| VaultError::EntryNotFound(name.to_owned()))?;
            let locked = shared.locked_path(&stored);
            let mut input = BufReader::new(File::open(&locked).map_err(io_err(&locked))?);
            produce(&shared.open_path(name), |out| {
                decrypt_stream(&shared.key, &mut input, out, progress_for(shared, name)).map(|_| ())
            })?;
            commit(shared, |idx| {
                if let Some(e) = idx.iter_mut().find(|e| e.original_name == name) {
                    e.state = EntryState::Unlocked;
                }
            })
        }
    }
}

