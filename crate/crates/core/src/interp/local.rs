//! Local mode: every unit runs in its own in-process environment, reached
//! through the same JSON boundary a remote call would cross.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::rc::{Rc, Weak};
use std::time::Duration;

use super::shim::{DispatchError, Dispatcher};
use super::{error_payload, ErrorKind, Interpreter, RuntimeError};
use crate::syntax::parse;

pub const HANDLER: &str = "lambda_handler";

/// Dispatcher that runs units in warm, per-unit interpreter environments.
///
/// Environments are born on first dispatch and kept for the runtime's life,
/// so module globals of a unit persist across calls, as they would on one
/// warm instance.
pub struct LocalRuntime {
    units: HashMap<String, String>,
    envs: RefCell<HashMap<String, Rc<Interpreter>>>,
    dispatches: Cell<u64>,
    timeout: Option<Duration>,
    me: Weak<LocalRuntime>,
}

struct Backref(Weak<LocalRuntime>);

impl Dispatcher for Backref {
    fn dispatch(&self, unit: &str, event: &str) -> Result<String, DispatchError> {
        match self.0.upgrade() {
            Some(rt) => rt.dispatch(unit, event),
            None => Err(DispatchError::Transport("local runtime dropped".into())),
        }
    }
}

impl LocalRuntime {
    /// `units` maps unit names to their generated source text.
    pub fn new(units: impl IntoIterator<Item = (String, String)>) -> Rc<LocalRuntime> {
        Self::with_timeout(units, None)
    }

    pub fn with_timeout(
        units: impl IntoIterator<Item = (String, String)>,
        timeout: Option<Duration>,
    ) -> Rc<LocalRuntime> {
        let units = units.into_iter().collect();
        Rc::new_cyclic(|me| LocalRuntime {
            units,
            envs: RefCell::new(HashMap::new()),
            dispatches: Cell::new(0),
            timeout,
            me: me.clone(),
        })
    }

    /// A dispatcher handle for client environments.
    pub fn dispatcher(&self) -> Rc<dyn Dispatcher> {
        Rc::new(Backref(self.me.clone()))
    }

    /// Handler invocations so far, nested ones included.
    pub fn dispatch_count(&self) -> u64 {
        self.dispatches.get()
    }

    fn instance(&self, unit: &str) -> Result<Rc<Interpreter>, DispatchError> {
        if let Some(env) = self.envs.borrow().get(unit) {
            return Ok(env.clone());
        }
        let source = self
            .units
            .get(unit)
            .ok_or_else(|| DispatchError::UnknownFunction(unit.to_string()))?;
        let tree = parse(source).map_err(|e| DispatchError::Deployment {
            unit: unit.to_string(),
            message: e.to_string(),
        })?;
        let env = Rc::new(Interpreter::new());
        env.add_source(unit, tree);
        env.set_dispatcher(self.dispatcher());
        self.envs.borrow_mut().insert(unit.to_string(), env.clone());
        Ok(env)
    }

    /// Serializes `event`, runs the unit's handler and parses the response.
    pub fn call_with_json_roundtrip(
        &self,
        unit: &str,
        event: &serde_json::Value,
    ) -> Result<serde_json::Value, DispatchError> {
        let reply = self.dispatch(unit, &event.to_string())?;
        serde_json::from_str(&reply).map_err(|e| DispatchError::Transport(e.to_string()))
    }
}

impl Dispatcher for LocalRuntime {
    fn dispatch(&self, unit: &str, event: &str) -> Result<String, DispatchError> {
        let env = self.instance(unit)?;
        self.dispatches.set(self.dispatches.get() + 1);
        // The unit's top level runs once, on first import.
        if let Err(e) = env.import(unit) {
            return Ok(error_payload(&e));
        }
        if env.module(env.import(unit).expect("imported")).get(HANDLER).is_none() {
            let e = RuntimeError::new(ErrorKind::Name, format!("{unit} defines no {HANDLER}"));
            return Ok(error_payload(&e));
        }
        Ok(env.with_timeout(self.timeout, || env.handle_event(unit, HANDLER, event)))
    }
}
