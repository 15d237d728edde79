//! A local FaaS runtime: a registry of deployed unit archives, warm
//! instances that keep module state between invocations, and per-function
//! limits.
//!
//! Each instance owns one interpreter environment on its own thread and
//! serves one invocation at a time. Calls a unit makes to other units are
//! routed back into the same emulator.

mod gateway;
mod remote;

use std::collections::{HashMap, VecDeque};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Condvar, Mutex, Weak};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interp::{error_payload, DispatchError, Dispatcher, ErrorKind, Interpreter, RuntimeError, STACK_SIZE};
use crate::package::{PackageError, UnitArchive, UnitConfig};
use crate::syntax::{check_subset, parse, Module, StmtKind};

pub use gateway::{serve, Gateway};
pub use remote::{RemoteClient, RemoteDispatcher, RemoteError, RemoteRun, RemoteStats, HTTP_REQUESTS};

pub const DEFAULT_POOL_SIZE: usize = 8;
pub const DEFAULT_GRACE: Duration = Duration::from_millis(50);
pub const DEFAULT_BIND: &str = "127.0.0.1:8799";

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EmulatorError {
    #[error("unknown function {0:?}")]
    UnknownFunction(String),
    #[error(transparent)]
    Package(#[from] PackageError),
    #[error("cannot deploy {name}: {message}")]
    Invalid { name: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmulatorConfig {
    /// Concurrent top-level invocations per function before requests queue.
    pub pool_size: usize,
    /// Slack on top of a unit's timeout before the caller gives up on it.
    pub grace: Duration,
}

impl Default for EmulatorConfig {
    fn default() -> Self {
        EmulatorConfig {
            pool_size: DEFAULT_POOL_SIZE,
            grace: DEFAULT_GRACE,
        }
    }
}

/// Returned by [`Emulator::create`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateReport {
    pub name: String,
    /// Wall-clock deployment time in milliseconds.
    pub deploy_ms: f64,
}

/// One invocation as the emulator saw it.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    /// Response JSON text: the handler's result or an error payload.
    pub response: String,
    pub instance: u64,
    pub cold: bool,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FunctionStats {
    pub invocations: u64,
    pub cold_starts: u64,
    pub instances: usize,
}

struct Job {
    event: String,
    reply: mpsc::Sender<String>,
}

struct Instance {
    id: u64,
    jobs: mpsc::Sender<Job>,
}

#[derive(Default)]
struct Pool {
    /// Warm instances, least recently used first.
    idle: VecDeque<Instance>,
    /// Top-level invocations in flight.
    busy: usize,
    /// Tickets of queued top-level requests, oldest first.
    queue: VecDeque<u64>,
    next_ticket: u64,
    live: usize,
}

struct Function {
    name: String,
    archive: UnitArchive,
    config: UnitConfig,
    tree: Module,
    pool: Mutex<Pool>,
    freed: Condvar,
    invocations: AtomicU64,
    cold_starts: AtomicU64,
}

struct Inner {
    config: EmulatorConfig,
    functions: Mutex<HashMap<String, Arc<Function>>>,
    next_instance: AtomicU64,
}

/// Handle to a running emulator; clones share the registry.
#[derive(Clone)]
pub struct Emulator {
    inner: Arc<Inner>,
}

impl Default for Emulator {
    fn default() -> Self {
        Emulator::new(EmulatorConfig::default())
    }
}

/// Dispatcher installed in every instance: nested calls go straight back
/// into the emulator and bypass the pool cap, so a chain of calls can never
/// wait on itself.
struct Nested(Weak<Inner>);

impl Dispatcher for Nested {
    fn dispatch(&self, unit: &str, event: &str) -> Result<String, DispatchError> {
        let inner = self
            .0
            .upgrade()
            .ok_or_else(|| DispatchError::Transport("emulator stopped".into()))?;
        Emulator { inner }
            .run(unit, event, true, false)
            .map(|i| i.response)
            .map_err(|e| match e {
                EmulatorError::UnknownFunction(n) => DispatchError::UnknownFunction(n),
                other => DispatchError::Transport(other.to_string()),
            })
    }
}

fn validate(name: &str, archive: &UnitArchive) -> Result<(UnitConfig, Module), EmulatorError> {
    let unpacked = archive.unpack()?;
    let config = unpacked.config;
    if config.name != name {
        return Err(PackageError::NameMismatch {
            unit: name.to_string(),
            config: config.name,
        }
        .into());
    }
    config.validate()?;
    let invalid = |message: String| EmulatorError::Invalid {
        name: name.to_string(),
        message,
    };
    let tree = parse(&unpacked.source).map_err(|e| invalid(e.to_string()))?;
    if let Some(v) = check_subset(&tree).first() {
        return Err(invalid(v.to_string()));
    }
    let handler = config.handler.rsplit('.').next().unwrap_or_default().to_string();
    let ok = tree
        .body
        .iter()
        .any(|s| matches!(&s.kind, StmtKind::FunctionDef(d) if d.name == handler && d.params.len() == 2));
    if !ok {
        return Err(invalid(format!("no handler {handler}(event, context)")));
    }
    Ok((config, tree))
}

impl Emulator {
    pub fn new(config: EmulatorConfig) -> Self {
        Emulator {
            inner: Arc::new(Inner {
                config,
                functions: Mutex::new(HashMap::new()),
                next_instance: AtomicU64::new(1),
            }),
        }
    }

    pub fn config(&self) -> EmulatorConfig {
        self.inner.config
    }

    /// Deploys `archive` under `name`. Redeploying identical bytes keeps the
    /// warm instances; different bytes replace the function and drop them.
    pub fn create(&self, name: &str, archive: UnitArchive) -> Result<CreateReport, EmulatorError> {
        let start = Instant::now();
        let (config, tree) = validate(name, &archive)?;
        let mut functions = self.inner.functions.lock().unwrap();
        let same = functions.get(name).is_some_and(|f| f.archive == archive);
        if !same {
            functions.insert(
                name.to_string(),
                Arc::new(Function {
                    name: name.to_string(),
                    archive,
                    config,
                    tree,
                    pool: Mutex::new(Pool::default()),
                    freed: Condvar::new(),
                    invocations: AtomicU64::new(0),
                    cold_starts: AtomicU64::new(0),
                }),
            );
        }
        Ok(CreateReport {
            name: name.to_string(),
            deploy_ms: start.elapsed().as_secs_f64() * 1000.0,
        })
    }

    /// Deploys an archive under the name its config declares.
    pub fn create_from_archive(&self, archive: UnitArchive) -> Result<CreateReport, EmulatorError> {
        let name = archive.unpack()?.config.name;
        self.create(&name, archive)
    }

    pub fn delete(&self, name: &str) -> bool {
        self.inner.functions.lock().unwrap().remove(name).is_some()
    }

    /// Deployed function names, sorted.
    pub fn list(&self) -> Vec<String> {
        let mut names: Vec<String> = self.inner.functions.lock().unwrap().keys().cloned().collect();
        names.sort();
        names
    }

    pub fn contains(&self, name: &str) -> bool {
        self.inner.functions.lock().unwrap().contains_key(name)
    }

    pub fn stats(&self, name: &str) -> Option<FunctionStats> {
        let f = self.function(name).ok()?;
        let live = f.pool.lock().unwrap().live;
        Some(FunctionStats {
            invocations: f.invocations.load(Ordering::SeqCst),
            cold_starts: f.cold_starts.load(Ordering::SeqCst),
            instances: live,
        })
    }

    /// Runs the handler of `name` for `event` (JSON text) on a warm
    /// instance, or a new one if none is free. Function faults come back as
    /// error payloads, not as `Err`.
    pub fn invoke(&self, name: &str, event: &str) -> Result<String, EmulatorError> {
        self.run(name, event, false, false).map(|i| i.response)
    }

    /// Like [`invoke`](Self::invoke), with instance details.
    pub fn invoke_detailed(&self, name: &str, event: &str) -> Result<Invocation, EmulatorError> {
        self.run(name, event, false, false)
    }

    /// Invokes on a newly born instance, which joins the pool afterwards.
    pub fn invoke_cold(&self, name: &str, event: &str) -> Result<Invocation, EmulatorError> {
        self.run(name, event, false, true)
    }

    fn function(&self, name: &str) -> Result<Arc<Function>, EmulatorError> {
        self.inner
            .functions
            .lock()
            .unwrap()
            .get(name)
            .cloned()
            .ok_or_else(|| EmulatorError::UnknownFunction(name.to_string()))
    }

    fn run(&self, name: &str, event: &str, nested: bool, cold: bool) -> Result<Invocation, EmulatorError> {
        let f = self.function(name)?;
        let start = Instant::now();
        let warm = {
            let mut pool = f.pool.lock().unwrap();
            if !nested {
                let ticket = pool.next_ticket;
                pool.next_ticket += 1;
                pool.queue.push_back(ticket);
                while pool.queue.front() != Some(&ticket) || pool.busy >= self.inner.config.pool_size {
                    pool = f.freed.wait(pool).unwrap();
                }
                pool.queue.pop_front();
                pool.busy += 1;
                // The next ticket may be able to go as well.
                f.freed.notify_all();
            }
            if cold {
                None
            } else {
                pool.idle.pop_front()
            }
        };
        let is_cold = warm.is_none();
        let instance = match warm {
            Some(i) => i,
            None => {
                f.cold_starts.fetch_add(1, Ordering::SeqCst);
                self.birth(&f)
            }
        };
        f.invocations.fetch_add(1, Ordering::SeqCst);
        let id = instance.id;
        let (reply, answer) = mpsc::channel();
        let limit = Duration::from_secs(f.config.timeout_s as u64) + self.inner.config.grace;
        let sent = instance.jobs.send(Job {
            event: event.to_string(),
            reply,
        });
        let outcome = match sent {
            Ok(()) => answer.recv_timeout(limit).map_err(|e| match e {
                mpsc::RecvTimeoutError::Timeout => ErrorKind::Timeout,
                mpsc::RecvTimeoutError::Disconnected => ErrorKind::Remote,
            }),
            Err(_) => Err(ErrorKind::Remote),
        };
        let mut pool = f.pool.lock().unwrap();
        if !nested {
            pool.busy -= 1;
        }
        let response = match outcome {
            Ok(text) => {
                pool.idle.push_back(instance);
                text
            }
            Err(kind) => {
                // A stuck or dead instance is never reused.
                pool.live -= 1;
                let message = match kind {
                    ErrorKind::Timeout => format!("{name} timed out after {} s", f.config.timeout_s),
                    _ => format!("{name}: instance died"),
                };
                error_payload(&RuntimeError::new(kind, message))
            }
        };
        drop(pool);
        f.freed.notify_all();
        Ok(Invocation {
            response,
            instance: id,
            cold: is_cold,
            elapsed: start.elapsed(),
        })
    }

    /// Starts an instance thread. The unit's top level runs once, before
    /// the first job.
    fn birth(&self, f: &Arc<Function>) -> Instance {
        let id = self.inner.next_instance.fetch_add(1, Ordering::SeqCst);
        let (jobs, rx) = mpsc::channel::<Job>();
        let name = f.name.clone();
        let tree = f.tree.clone();
        let handler = f.config.handler.rsplit('.').next().unwrap_or_default().to_string();
        let timeout = Duration::from_secs(f.config.timeout_s as u64);
        let weak = Arc::downgrade(&self.inner);
        f.pool.lock().unwrap().live += 1;
        thread::Builder::new()
            .name(format!("{name}#{id}"))
            .stack_size(STACK_SIZE)
            .spawn(move || {
                let env = Interpreter::new();
                env.add_source(&name, tree);
                env.set_dispatcher(Rc::new(Nested(weak)));
                let mut birth: Option<Result<(), RuntimeError>> = None;
                for job in rx {
                    let out = env.with_timeout(Some(timeout), || {
                        let born = birth.get_or_insert_with(|| env.import(&name).map(|_| ()));
                        match born {
                            Ok(()) => env.handle_event(&name, &handler, &job.event),
                            Err(e) => error_payload(e),
                        }
                    });
                    let _ = job.reply.send(out);
                }
            })
            .expect("spawn instance thread");
        Instance { id, jobs }
    }
}

#[cfg(test)]
mod tests;
