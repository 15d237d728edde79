//! Client side of the gateway, and the dispatcher production mode uses.

use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use thiserror::Error;
use ureq::Agent;

use super::CreateReport;
use crate::interp::{DispatchError, Dispatcher, ExecResult, RuntimeError};
use crate::package::{package_unit, PackageError, UnitArchive};
use crate::transform::{ClientRun, Program};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RemoteError {
    #[error("unknown function {0:?}")]
    UnknownFunction(String),
    #[error("{endpoint}: {message}")]
    Transport { endpoint: String, message: String },
    #[error("{endpoint} answered {status}: {body}")]
    Status {
        endpoint: String,
        status: u16,
        body: String,
    },
    #[error(transparent)]
    Package(#[from] PackageError),
}

/// Requests sent by every [`RemoteClient`] in this process.
pub static HTTP_REQUESTS: AtomicU64 = AtomicU64::new(0);

/// Talks to a gateway over HTTP.
#[derive(Clone)]
pub struct RemoteClient {
    base: String,
    agent: Agent,
}

impl RemoteClient {
    /// `endpoint` may omit the scheme; `http://` is assumed.
    pub fn new(endpoint: &str) -> Self {
        let base = if endpoint.contains("://") {
            endpoint.trim_end_matches('/').to_string()
        } else {
            format!("http://{}", endpoint.trim_end_matches('/'))
        };
        let agent: Agent = Agent::config_builder().http_status_as_error(false).build().into();
        RemoteClient { base, agent }
    }

    pub fn endpoint(&self) -> &str {
        &self.base
    }

    fn transport(&self, e: ureq::Error) -> RemoteError {
        RemoteError::Transport {
            endpoint: self.base.clone(),
            message: e.to_string(),
        }
    }

    fn finish(
        &self,
        response: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<(u16, String), RemoteError> {
        HTTP_REQUESTS.fetch_add(1, Ordering::Relaxed);
        let mut response = response.map_err(|e| self.transport(e))?;
        let status = response.status().as_u16();
        let body = response.body_mut().read_to_string().map_err(|e| self.transport(e))?;
        Ok((status, body))
    }

    fn expect(&self, (status, body): (u16, String), ok: u16) -> Result<String, RemoteError> {
        if status == ok {
            Ok(body)
        } else {
            Err(RemoteError::Status {
                endpoint: self.base.clone(),
                status,
                body,
            })
        }
    }

    pub fn create(&self, archive: &UnitArchive) -> Result<CreateReport, RemoteError> {
        let r = self
            .agent
            .post(format!("{}/functions", self.base))
            .content_type("application/zip")
            .send(&archive.bytes[..]);
        let body = self.expect(self.finish(r)?, 201)?;
        serde_json::from_str(&body).map_err(|e| RemoteError::Transport {
            endpoint: self.base.clone(),
            message: e.to_string(),
        })
    }

    /// Invokes `name` with `event` (JSON text) and returns the response text.
    pub fn invoke(&self, name: &str, event: &str) -> Result<String, RemoteError> {
        let r = self
            .agent
            .post(format!("{}/functions/{name}/invoke", self.base))
            .content_type("application/json")
            .send(event);
        let (status, body) = self.finish(r)?;
        if status == 404 {
            return Err(RemoteError::UnknownFunction(name.to_string()));
        }
        self.expect((status, body), 200)
    }

    pub fn list(&self) -> Result<Vec<String>, RemoteError> {
        let r = self.agent.get(format!("{}/functions", self.base)).call();
        let body = self.expect(self.finish(r)?, 200)?;
        serde_json::from_str(&body).map_err(|e| RemoteError::Transport {
            endpoint: self.base.clone(),
            message: e.to_string(),
        })
    }

    pub fn delete(&self, name: &str) -> Result<(), RemoteError> {
        let r = self.agent.delete(format!("{}/functions/{name}", self.base)).call();
        let (status, body) = self.finish(r)?;
        match status {
            204 => Ok(()),
            404 => Err(RemoteError::UnknownFunction(name.to_string())),
            _ => self.expect((status, body), 204).map(|_| ()),
        }
    }
}

/// Counters a [`RemoteDispatcher`] keeps; shared so they can be read after
/// the dispatcher has been handed to an interpreter.
#[derive(Debug, Default)]
pub struct RemoteStats {
    pub invocations: AtomicU64,
    pub deployments: AtomicU64,
    /// Total deployment wall time in microseconds.
    pub deploy_us: AtomicU64,
}

impl RemoteStats {
    pub fn deploy_ms(&self) -> f64 {
        self.deploy_us.load(Ordering::SeqCst) as f64 / 1000.0
    }
}

/// Dispatches over HTTP, deploying a unit (with every unit it can reach)
/// the first time it is invoked.
pub struct RemoteDispatcher {
    client: RemoteClient,
    archives: HashMap<String, UnitArchive>,
    dependencies: HashMap<String, BTreeSet<String>>,
    deployed: Mutex<BTreeSet<String>>,
    stats: Arc<RemoteStats>,
}

impl RemoteDispatcher {
    pub fn for_program(client: RemoteClient, program: &Program) -> Result<Self, PackageError> {
        let mut archives = HashMap::new();
        let mut dependencies = HashMap::new();
        for u in &program.units {
            archives.insert(u.unit_name.clone(), package_unit(u, &u.config)?);
            dependencies.insert(u.unit_name.clone(), u.dependencies.clone());
        }
        Ok(RemoteDispatcher {
            client,
            archives,
            dependencies,
            deployed: Mutex::new(BTreeSet::new()),
            stats: Arc::new(RemoteStats::default()),
        })
    }

    /// Treats every unit as already deployed.
    pub fn assume_deployed(self) -> Self {
        self.deployed.lock().unwrap().extend(self.archives.keys().cloned());
        self
    }

    pub fn stats(&self) -> Arc<RemoteStats> {
        self.stats.clone()
    }

    fn deploy(&self, unit: &str) -> Result<(), DispatchError> {
        let mut deployed = self.deployed.lock().unwrap();
        let mut todo = vec![unit.to_string()];
        while let Some(u) = todo.pop() {
            if deployed.contains(&u) {
                continue;
            }
            let Some(archive) = self.archives.get(&u) else {
                return Err(DispatchError::UnknownFunction(u));
            };
            let start = Instant::now();
            self.client.create(archive).map_err(|e| DispatchError::Deployment {
                unit: u.clone(),
                message: e.to_string(),
            })?;
            self.stats
                .deploy_us
                .fetch_add(start.elapsed().as_micros() as u64, Ordering::SeqCst);
            self.stats.deployments.fetch_add(1, Ordering::SeqCst);
            todo.extend(self.dependencies.get(&u).into_iter().flatten().cloned());
            deployed.insert(u);
        }
        Ok(())
    }
}

impl Dispatcher for RemoteDispatcher {
    fn dispatch(&self, unit: &str, event: &str) -> Result<String, DispatchError> {
        self.deploy(unit)?;
        self.stats.invocations.fetch_add(1, Ordering::SeqCst);
        self.client.invoke(unit, event).map_err(|e| match e {
            RemoteError::UnknownFunction(n) => DispatchError::UnknownFunction(n),
            other => DispatchError::Transport(other.to_string()),
        })
    }
}

/// Outcome of a production-mode run.
#[derive(Debug, Clone, PartialEq)]
pub struct RemoteRun {
    pub result: ExecResult,
    /// Top-level invocations the client made.
    pub invocations: u64,
    pub deployments: u64,
    pub deploy_ms: f64,
}

impl Program {
    /// Runs the client side against the gateway at `client`, deploying
    /// units lazily.
    pub fn run_remote(&self, client: RemoteClient, run: ClientRun) -> Result<RemoteRun, RuntimeError> {
        self.run_remote_with(client, run, false)
    }

    /// Runs against units a previous [`deploy`](Self::deploy) put in place.
    pub fn run_deployed(&self, client: RemoteClient, run: ClientRun) -> Result<RemoteRun, RuntimeError> {
        self.run_remote_with(client, run, true)
    }

    /// Deploys every unit now; returns the total deployment time in
    /// milliseconds.
    pub fn deploy(&self, client: &RemoteClient) -> Result<f64, RemoteError> {
        let start = Instant::now();
        for u in &self.units {
            client.create(&package_unit(u, &u.config)?)?;
        }
        Ok(start.elapsed().as_secs_f64() * 1000.0)
    }

    fn run_remote_with(&self, client: RemoteClient, run: ClientRun, deployed: bool) -> Result<RemoteRun, RuntimeError> {
        let mut dispatcher = RemoteDispatcher::for_program(client, self)
            .map_err(|e| RuntimeError::new(crate::interp::ErrorKind::Remote, e.to_string()))?;
        if deployed {
            dispatcher = dispatcher.assume_deployed();
        }
        let stats = dispatcher.stats();
        let counter = stats.clone();
        let (result, invocations) = self.run_client(run, move || {
            let d: Rc<dyn Dispatcher> = Rc::new(dispatcher);
            (
                d,
                Box::new(move || counter.invocations.load(Ordering::SeqCst)) as Box<dyn Fn() -> u64>,
            )
        })?;
        Ok(RemoteRun {
            result: ExecResult {
                call_count: invocations,
                ..result
            },
            invocations,
            deployments: stats.deployments.load(Ordering::SeqCst),
            deploy_ms: stats.deploy_ms(),
        })
    }
}
