//! Device description: subsystems plus dipole-dipole couplings. A
//! `DeviceSpec` fully determines both the circuit and the effective
//! many-body Hamiltonians.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subsystem::{SubsystemKind, SubsystemSpec};
use crate::tensor::IndexMap;

/// One dipole-dipole interaction term `G (v̂_a ⊗ v̂_b)` where `v̂` is `n̂`
/// for transmons and `(a + a†)` for resonators/TLS. The channel number
/// selects which of the ten kind pairings the term belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub a: usize,
    pub b: usize,
    /// Interaction channel 0..=9.
    pub channel: u8,
    /// Interaction strength constant `G/2π` in GHz.
    pub g: f64,
    /// Optional pinned effective interaction strength `g/2π` in GHz used by
    /// the effective model when the interaction is held static; computed
    /// from the zero-flux Josephson energies when absent.
    #[serde(default)]
    pub g_static: Option<f64>,
}

/// Expected subsystem kinds per interaction channel, unordered.
fn channel_kinds(channel: u8) -> Option<(SubsystemKind, SubsystemKind)> {
    use SubsystemKind::*;
    Some(match channel {
        0 => (FixedTransmon, FixedTransmon),
        1 => (TunableTransmon, FixedTransmon),
        2 => (TunableTransmon, TunableTransmon),
        3 => (Resonator, FixedTransmon),
        4 => (Resonator, TunableTransmon),
        5 => (Tls, FixedTransmon),
        6 => (Tls, TunableTransmon),
        7 => (Resonator, Resonator),
        8 => (Tls, Resonator),
        9 => (Tls, Tls),
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub subsystems: Vec<SubsystemSpec>,
    #[serde(default)]
    pub couplings: Vec<Coupling>,
}

impl DeviceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.subsystems.is_empty() {
            return Err(Error::config("device: no subsystems"));
        }
        for (i, s) in self.subsystems.iter().enumerate() {
            s.validate().map_err(|e| Error::config(format!("subsystem {i}: {e}")))?;
        }
        for (k, c) in self.couplings.iter().enumerate() {
            if c.a >= self.subsystems.len() || c.b >= self.subsystems.len() {
                return Err(Error::config(format!("coupling {k}: endpoint out of range")));
            }
            if c.a == c.b {
                return Err(Error::config(format!("coupling {k}: endpoints coincide")));
            }
            let want = channel_kinds(c.channel)
                .ok_or_else(|| Error::config(format!("coupling {k}: unknown channel {}", c.channel)))?;
            let got = (self.subsystems[c.a].kind, self.subsystems[c.b].kind);
            if !(got == want || (got.1, got.0) == want) {
                return Err(Error::config(format!(
                    "coupling {k}: channel {} expects kinds {:?}, endpoints are {:?}",
                    c.channel, want, got
                )));
            }
        }
        Ok(())
    }

    pub fn index_map(&self) -> Result<IndexMap> {
        let dims: Vec<usize> = self.subsystems.iter().map(|s| s.n_basis).collect();
        IndexMap::new(&dims)
    }

    pub fn total_dim(&self) -> usize {
        self.subsystems.iter().map(|s| s.n_basis).product()
    }

    /// Indices of transmon subsystems, in device order. These are the
    /// qubit carriers of a gate program.
    pub fn transmon_indices(&self) -> Vec<usize> {
        self.subsystems
            .iter()
            .enumerate()
            .filter(|(_, s)| s.kind.is_transmon())
            .map(|(i, _)| i)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_qubit_device() -> DeviceSpec {
        DeviceSpec {
            subsystems: vec![
                SubsystemSpec::tunable_transmon(1.068, 2.355, 7.064, 0.0, 4),
                SubsystemSpec::tunable_transmon(1.037, 3.612, 10.837, 0.0, 4),
                SubsystemSpec::resonator(45.0, 4),
            ],
            couplings: vec![
                Coupling { a: 2, b: 0, channel: 4, g: 0.3, g_static: None },
                Coupling { a: 2, b: 1, channel: 4, g: 0.3, g_static: None },
            ],
        }
    }

    #[test]
    fn valid_device_passes() {
        two_qubit_device().validate().unwrap();
    }

    #[test]
    fn channel_kind_mismatch_is_config_error() {
        let mut d = two_qubit_device();
        d.couplings[0].channel = 7; // resonator-resonator on a transmon pair
        assert!(matches!(d.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn coupling_endpoint_order_is_free() {
        let mut d = two_qubit_device();
        d.couplings[0] = Coupling { a: 0, b: 2, channel: 4, g: 0.3, g_static: None };
        d.validate().unwrap();
    }
}
