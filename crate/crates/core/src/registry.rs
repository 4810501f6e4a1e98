//! Named strategy objects selected at runtime from configuration.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::constraints::{HorizonMax, JacobianMode, MultiplierSchedule, NumericJacobian, PaperJacobian, PerStep};
use crate::dynamics::{Discretizer, Euler, RigidBody, RigidBodyParams, RigidRotor, SemiImplicit, TwistModel, ZeroOrderHold};
use crate::error::{Error, Result};
use crate::harness::{ExecutionMode, Feedback, OpenLoop};
use crate::liegroup::{LieGroup, Se3, So3};

/// Builds a twist model from rigid-body parameters.
pub type ModelFactory = fn(&RigidBodyParams) -> Arc<dyn TwistModel>;

#[derive(Clone, Debug)]
pub struct Registry {
    groups: BTreeMap<String, Arc<dyn LieGroup>>,
    models: BTreeMap<String, ModelFactory>,
    discretizers: BTreeMap<String, Arc<dyn Discretizer>>,
    jacobians: BTreeMap<String, Arc<dyn JacobianMode>>,
    schedules: BTreeMap<String, Arc<dyn MultiplierSchedule>>,
    modes: BTreeMap<String, Arc<dyn ExecutionMode>>,
}

fn lookup<T: Clone>(map: &BTreeMap<String, T>, kind: &'static str, name: &str) -> Result<T> {
    map.get(name).cloned().ok_or_else(|| Error::UnknownStrategy { kind, name: name.to_string() })
}

fn rigid_body(p: &RigidBodyParams) -> Arc<dyn TwistModel> {
    Arc::new(RigidBody::new(p.clone()))
}

fn rigid_rotor(p: &RigidBodyParams) -> Arc<dyn TwistModel> {
    Arc::new(RigidRotor::new(p))
}

impl Registry {
    /// A registry with nothing registered.
    pub fn empty() -> Self {
        Self {
            groups: BTreeMap::new(),
            models: BTreeMap::new(),
            discretizers: BTreeMap::new(),
            jacobians: BTreeMap::new(),
            schedules: BTreeMap::new(),
            modes: BTreeMap::new(),
        }
    }

    pub fn register_group(&mut self, g: Arc<dyn LieGroup>) {
        self.groups.insert(g.id().0.to_string(), g);
    }

    pub fn register_model(&mut self, name: &str, factory: ModelFactory) {
        self.models.insert(name.to_string(), factory);
    }

    pub fn register_discretizer(&mut self, d: Arc<dyn Discretizer>) {
        self.discretizers.insert(d.name().to_string(), d);
    }

    pub fn register_jacobian(&mut self, j: Arc<dyn JacobianMode>) {
        self.jacobians.insert(j.name().to_string(), j);
    }

    pub fn register_schedule(&mut self, s: Arc<dyn MultiplierSchedule>) {
        self.schedules.insert(s.name().to_string(), s);
    }

    pub fn register_mode(&mut self, m: Arc<dyn ExecutionMode>) {
        self.modes.insert(m.name().to_string(), m);
    }

    pub fn group(&self, name: &str) -> Result<Arc<dyn LieGroup>> {
        lookup(&self.groups, "group", name)
    }

    pub fn model(&self, name: &str, params: &RigidBodyParams) -> Result<Arc<dyn TwistModel>> {
        Ok(lookup(&self.models, "model", name)?(params))
    }

    pub fn discretizer(&self, name: &str) -> Result<Arc<dyn Discretizer>> {
        lookup(&self.discretizers, "discretizer", name)
    }

    pub fn jacobian(&self, name: &str) -> Result<Arc<dyn JacobianMode>> {
        lookup(&self.jacobians, "jacobian mode", name)
    }

    pub fn schedule(&self, name: &str) -> Result<Arc<dyn MultiplierSchedule>> {
        lookup(&self.schedules, "multiplier schedule", name)
    }

    pub fn mode(&self, name: &str) -> Result<Arc<dyn ExecutionMode>> {
        lookup(&self.modes, "execution mode", name)
    }

    /// Registered names per category, sorted.
    pub fn names(&self) -> Vec<(&'static str, Vec<String>)> {
        vec![
            ("group", self.groups.keys().cloned().collect()),
            ("model", self.models.keys().cloned().collect()),
            ("discretizer", self.discretizers.keys().cloned().collect()),
            ("jacobian", self.jacobians.keys().cloned().collect()),
            ("schedule", self.schedules.keys().cloned().collect()),
            ("mode", self.modes.keys().cloned().collect()),
        ]
    }
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register_group(Arc::new(So3));
        r.register_group(Arc::new(Se3));
        r.register_model("rigid_body", rigid_body);
        r.register_model("rigid_rotor", rigid_rotor);
        r.register_discretizer(Arc::new(Euler));
        r.register_discretizer(Arc::new(ZeroOrderHold));
        r.register_discretizer(Arc::new(SemiImplicit));
        r.register_jacobian(Arc::new(NumericJacobian::default()));
        r.register_jacobian(Arc::new(PaperJacobian));
        r.register_schedule(Arc::new(HorizonMax));
        r.register_schedule(Arc::new(PerStep));
        r.register_mode(Arc::new(OpenLoop));
        r.register_mode(Arc::new(Feedback { full_state: true }));
        r.register_mode(Arc::new(Feedback { full_state: false }));
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    #[test]
    fn default_names() {
        let r = Registry::default();
        assert_eq!(r.group("SE3").unwrap().dim(), 6);
        assert_eq!(r.discretizer("zoh").unwrap().name(), "zoh");
        assert_eq!(r.jacobian("paper").unwrap().name(), "paper");
        assert_eq!(r.schedule("per_step").unwrap().name(), "per_step");
        assert_eq!(r.mode("fb").unwrap().name(), "fb");
        let params = RigidBodyParams::new(Matrix3::identity(), 1.0).unwrap();
        assert_eq!(r.model("rigid_rotor", &params).unwrap().twist_dim(), 3);
    }

    #[test]
    fn unknown_names_are_reported() {
        let r = Registry::default();
        match r.jacobian("analytic") {
            Err(Error::UnknownStrategy { kind, name }) => {
                assert_eq!(kind, "jacobian mode");
                assert_eq!(name, "analytic");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(Registry::empty().group("SE3").is_err());
    }
}
