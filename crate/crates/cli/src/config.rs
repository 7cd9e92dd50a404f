//! On-disk configuration formats. Field names mirror the device-table
//! headers (`E_C`, `E_Jl`, `E_Jr`, `phi0_over_2pi`, `omega_R_over_2pi`,
//! `G`, `T_d`, `omega_D_over_2pi`, `delta_over_2pi`, ...); one file per
//! table analog.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};

use pulsesim::device::{Coupling, DeviceSpec};
use pulsesim::effective::{EffectiveDevice, EffectiveParams};
use pulsesim::program::{CzEntry, Gate, MpEntry, Program, PulseTable};
use pulsesim::pulse::{ChargeMp, FluxErf, FluxMw, FluxPulse};
use pulsesim::schedule::{Schedule, Segment, SegmentDrives};
use pulsesim::subsystem::{SpectrumModel, SubsystemKind, SubsystemSpec};

// ---------------------------------------------------------------- devices

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemFile {
    pub kind: String,
    #[serde(rename = "E_C", default)]
    pub e_c: f64,
    #[serde(rename = "E_Jl", default)]
    pub e_jl: f64,
    #[serde(rename = "E_Jr", default)]
    pub e_jr: f64,
    #[serde(rename = "omega_R_over_2pi", default)]
    pub omega_r_over_2pi: f64,
    #[serde(rename = "phi0_over_2pi", default)]
    pub phi0_over_2pi: f64,
    #[serde(default)]
    pub n0: f64,
    #[serde(default)]
    pub beta: Option<f64>,
    pub n_basis: usize,
    #[serde(rename = "N_c", default)]
    pub n_c: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingFile {
    pub a: usize,
    pub b: usize,
    pub channel: u8,
    #[serde(rename = "G")]
    pub g: f64,
    #[serde(rename = "g_static_over_2pi", default)]
    pub g_static: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveTransmonFile {
    pub sub: usize,
    /// "fixed", "approximation_i", "approximation_ii" or
    /// "approximation_iii".
    pub model: String,
    #[serde(rename = "omega_q0_over_2pi", default)]
    pub omega_q0_over_2pi: Option<f64>,
    #[serde(rename = "alpha_q0_over_2pi", default)]
    pub alpha_q0_over_2pi: Option<f64>,
    #[serde(default)]
    pub a_n: Option<Vec<f64>>,
    #[serde(default)]
    pub b_n: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceFile {
    pub subsystems: Vec<SubsystemFile>,
    #[serde(default)]
    pub couplings: Vec<CouplingFile>,
    /// Per-transmon effective-model parameters; required by the effective
    /// backend, ignored by the circuit backend.
    #[serde(default)]
    pub effective: Vec<EffectiveTransmonFile>,
}

fn subsystem_from_file(s: &SubsystemFile, idx: usize) -> Result<SubsystemSpec> {
    let kind = match s.kind.as_str() {
        "fixed_transmon" => SubsystemKind::FixedTransmon,
        "tunable_transmon" => SubsystemKind::TunableTransmon,
        "resonator" => SubsystemKind::Resonator,
        "tls" => SubsystemKind::Tls,
        other => {
            return Err(anyhow!(
                "subsystem {idx}: key \"kind\" expects one of fixed_transmon|tunable_transmon|resonator|tls, got \"{other}\""
            ))
        }
    };
    Ok(SubsystemSpec {
        kind,
        e_c: s.e_c,
        e_jl: s.e_jl,
        e_jr: s.e_jr,
        nu_r: s.omega_r_over_2pi,
        phi0_frac: s.phi0_over_2pi,
        n0: s.n0,
        beta: s.beta.unwrap_or(0.5),
        n_basis: s.n_basis,
        n_charge: s.n_c.unwrap_or(pulsesim::subsystem::DEFAULT_CHARGE_CUTOFF),
    })
}

impl DeviceFile {
    pub fn to_device(&self) -> Result<DeviceSpec> {
        let subsystems = self
            .subsystems
            .iter()
            .enumerate()
            .map(|(i, s)| subsystem_from_file(s, i))
            .collect::<Result<Vec<_>>>()?;
        let couplings = self
            .couplings
            .iter()
            .map(|c| Coupling { a: c.a, b: c.b, channel: c.channel, g: c.g, g_static: c.g_static })
            .collect();
        let device = DeviceSpec { subsystems, couplings };
        device.validate()?;
        Ok(device)
    }

    pub fn to_effective(&self) -> Result<EffectiveDevice> {
        let device = self.to_device()?;
        let mut params: Vec<Option<EffectiveParams>> = vec![None; device.subsystems.len()];
        for t in &self.effective {
            if t.sub >= params.len() {
                return Err(anyhow!("effective entry: subsystem {} out of range", t.sub));
            }
            let p = match t.model.as_str() {
                "fixed" => EffectiveParams::Fixed {
                    nu_q0: t
                        .omega_q0_over_2pi
                        .ok_or_else(|| anyhow!("effective entry {}: key \"omega_q0_over_2pi\" (number) required for model fixed", t.sub))?,
                    alpha_q0: t
                        .alpha_q0_over_2pi
                        .ok_or_else(|| anyhow!("effective entry {}: key \"alpha_q0_over_2pi\" (number) required for model fixed", t.sub))?,
                },
                "approximation_i" => EffectiveParams::Tunable { spectrum: SpectrumModel::ApproximationI },
                "approximation_ii" => EffectiveParams::Tunable {
                    spectrum: SpectrumModel::ApproximationIi {
                        nu_q0: t
                            .omega_q0_over_2pi
                            .ok_or_else(|| anyhow!("effective entry {}: key \"omega_q0_over_2pi\" (number) required for approximation II", t.sub))?,
                        alpha_q0: t
                            .alpha_q0_over_2pi
                            .ok_or_else(|| anyhow!("effective entry {}: key \"alpha_q0_over_2pi\" (number) required for approximation II", t.sub))?,
                    },
                },
                "approximation_iii" => EffectiveParams::Tunable {
                    spectrum: SpectrumModel::ApproximationIii {
                        a_n: t.a_n.clone().ok_or_else(|| anyhow!("effective entry {}: key \"a_n\" (array) required for approximation III", t.sub))?,
                        b_n: t.b_n.clone().ok_or_else(|| anyhow!("effective entry {}: key \"b_n\" (array) required for approximation III", t.sub))?,
                    },
                },
                other => return Err(anyhow!("effective entry {}: unknown model \"{other}\"", t.sub)),
            };
            params[t.sub] = Some(p);
        }
        let eff = EffectiveDevice { device, params };
        eff.validate()?;
        Ok(eff)
    }
}

// ----------------------------------------------------------- pulse tables

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpEntryFile {
    #[serde(rename = "T_d")]
    pub t_d: f64,
    #[serde(rename = "omega_D_over_2pi")]
    pub omega_d_over_2pi: f64,
    pub a: f64,
    pub sigma: f64,
    pub b: f64,
    #[serde(default)]
    pub z_pre: f64,
    #[serde(default)]
    pub z_post: f64,
    #[serde(default)]
    pub spectator_z: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CzEntryFile {
    pub pulse: String,
    #[serde(rename = "T_p")]
    pub t_p: f64,
    #[serde(rename = "T_d")]
    pub t_d: f64,
    #[serde(rename = "delta_over_2pi")]
    pub delta_over_2pi: f64,
    pub sigma: f64,
    pub driven_qubit: usize,
    #[serde(default)]
    pub rz: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseTableFile {
    #[serde(default)]
    pub mp: BTreeMap<String, MpEntryFile>,
    #[serde(default)]
    pub cz: BTreeMap<String, CzEntryFile>,
}

impl PulseTableFile {
    pub fn to_table(&self) -> Result<PulseTable> {
        let mut table = PulseTable::default();
        for (k, e) in &self.mp {
            let q: usize = k.parse().with_context(|| format!("pulse table: mp key \"{k}\" is not a qubit index"))?;
            table.mp.insert(
                q,
                MpEntry {
                    t_d: e.t_d,
                    nu_d: e.omega_d_over_2pi,
                    a: e.a,
                    sigma: e.sigma,
                    b: e.b,
                    z_pre: e.z_pre,
                    z_post: e.z_post,
                    spectator_z: e.spectator_z.clone(),
                },
            );
        }
        for (k, e) in &self.cz {
            let bimodal = match e.pulse.as_str() {
                "ump" => false,
                "bmp" => true,
                other => return Err(anyhow!("pulse table: cz entry \"{k}\": unknown pulse \"{other}\" (expected ump|bmp)")),
            };
            table.cz.insert(
                k.clone(),
                CzEntry {
                    t_p: e.t_p,
                    t_d: e.t_d,
                    delta_frac: e.delta_over_2pi,
                    sigma: e.sigma,
                    bimodal,
                    driven_qubit: e.driven_qubit,
                    rz: e.rz.clone(),
                },
            );
        }
        Ok(table)
    }

    pub fn from_table(table: &PulseTable) -> Self {
        let mut f = PulseTableFile::default();
        for (q, e) in &table.mp {
            f.mp.insert(
                q.to_string(),
                MpEntryFile {
                    t_d: e.t_d,
                    omega_d_over_2pi: e.nu_d,
                    a: e.a,
                    sigma: e.sigma,
                    b: e.b,
                    z_pre: e.z_pre,
                    z_post: e.z_post,
                    spectator_z: e.spectator_z.clone(),
                },
            );
        }
        for (k, e) in &table.cz {
            f.cz.insert(
                k.clone(),
                CzEntryFile {
                    pulse: if e.bimodal { "bmp".into() } else { "ump".into() },
                    t_p: e.t_p,
                    t_d: e.t_d,
                    delta_over_2pi: e.delta_frac,
                    sigma: e.sigma,
                    driven_qubit: e.driven_qubit,
                    rz: e.rz.clone(),
                },
            );
        }
        f
    }
}

// --------------------------------------------------------------- programs

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstructionFile {
    pub gate: String,
    pub targets: Vec<usize>,
    #[serde(default)]
    pub angle: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramFile {
    pub n_qubits: usize,
    pub gates: Vec<InstructionFile>,
}

impl ProgramFile {
    pub fn to_program(&self) -> Result<Program> {
        let mut gates = Vec::with_capacity(self.gates.len());
        for (i, inst) in self.gates.iter().enumerate() {
            let one = |what: &str| -> Result<usize> {
                if inst.targets.len() != 1 {
                    Err(anyhow!("instruction {i} ({what}): expected one target, got {:?}", inst.targets))
                } else {
                    Ok(inst.targets[0])
                }
            };
            let two = |what: &str| -> Result<(usize, usize)> {
                if inst.targets.len() != 2 {
                    Err(anyhow!("instruction {i} ({what}): expected two targets, got {:?}", inst.targets))
                } else {
                    Ok((inst.targets[0], inst.targets[1]))
                }
            };
            let g = match inst.gate.as_str() {
                "rx90" => Gate::Rx90 { q: one("rx90")? },
                "rz" => Gate::Rz {
                    q: one("rz")?,
                    angle: inst.angle.ok_or_else(|| anyhow!("instruction {i} (rz): key \"angle\" (number) required"))?,
                },
                "h" => Gate::H { q: one("h")? },
                "x" => Gate::X { q: one("x")? },
                "s" => Gate::S { q: one("s")? },
                "t" => Gate::T { q: one("t")? },
                "cz" => {
                    let (a, b) = two("cz")?;
                    Gate::Cz { a, b }
                }
                "cnot" => {
                    let (control, target) = two("cnot")?;
                    Gate::Cnot { control, target }
                }
                other => return Err(anyhow!("instruction {i}: unknown gate \"{other}\"")),
            };
            gates.push(g);
        }
        let p = Program { n_qubits: self.n_qubits, gates };
        p.validate()?;
        Ok(p)
    }
}

// -------------------------------------------------------------- schedules

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum PulseFile {
    FluxMw {
        #[serde(rename = "phi0_over_2pi")]
        phi0_over_2pi: f64,
        #[serde(rename = "delta_over_2pi")]
        delta_over_2pi: f64,
        #[serde(rename = "omega_D_over_2pi")]
        omega_d_over_2pi: f64,
        #[serde(rename = "T_rf")]
        t_rf: f64,
        #[serde(rename = "T_d")]
        t_d: f64,
    },
    FluxUmp {
        #[serde(rename = "delta_over_2pi")]
        delta_over_2pi: f64,
        sigma: f64,
        #[serde(rename = "T_p")]
        t_p: f64,
        #[serde(rename = "T_d")]
        t_d: f64,
    },
    FluxBmp {
        #[serde(rename = "delta_over_2pi")]
        delta_over_2pi: f64,
        sigma: f64,
        #[serde(rename = "T_p")]
        t_p: f64,
        #[serde(rename = "T_d")]
        t_d: f64,
    },
    ChargeMp {
        a: f64,
        b: f64,
        #[serde(rename = "omega_D_over_2pi")]
        omega_d_over_2pi: f64,
        sigma: f64,
        #[serde(rename = "T_d")]
        t_d: f64,
        #[serde(default)]
        phase: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSegmentFile {
    pub duration: f64,
    #[serde(default)]
    pub drives: Vec<(usize, PulseFile)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    pub segments: Vec<ScheduleSegmentFile>,
}

impl ScheduleFile {
    pub fn to_schedule(&self) -> Result<Schedule> {
        let mut schedule = Schedule::default();
        for (i, seg) in self.segments.iter().enumerate() {
            let mut flux: Vec<(usize, FluxPulse)> = Vec::new();
            let mut charge: Vec<(usize, ChargeMp)> = Vec::new();
            for (sub, pulse) in &seg.drives {
                match pulse {
                    PulseFile::FluxMw { phi0_over_2pi, delta_over_2pi, omega_d_over_2pi, t_rf, t_d } => {
                        flux.push((
                            *sub,
                            FluxPulse::FluxMw(FluxMw {
                                phi0_frac: *phi0_over_2pi,
                                delta_frac: *delta_over_2pi,
                                nu_d: *omega_d_over_2pi,
                                t_rf: *t_rf,
                                t_d: *t_d,
                            }),
                        ));
                    }
                    PulseFile::FluxUmp { delta_over_2pi, sigma, t_p, t_d }
                    | PulseFile::FluxBmp { delta_over_2pi, sigma, t_p, t_d } => {
                        let bimodal = matches!(pulse, PulseFile::FluxBmp { .. });
                        let erf = FluxErf {
                            delta_frac: *delta_over_2pi,
                            sigma: *sigma,
                            t_p: *t_p,
                            t_d: *t_d,
                            bimodal,
                        };
                        flux.push((*sub, if bimodal { FluxPulse::FluxBmp(erf) } else { FluxPulse::FluxUmp(erf) }));
                    }
                    PulseFile::ChargeMp { a, b, omega_d_over_2pi, sigma, t_d, phase } => {
                        charge.push((
                            *sub,
                            ChargeMp { a: *a, b: *b, nu_d: *omega_d_over_2pi, sigma: *sigma, t_d: *t_d, phase: *phase },
                        ));
                    }
                }
            }
            let drives = match (flux.is_empty(), charge.is_empty()) {
                (true, true) => SegmentDrives::Idle,
                (false, true) => SegmentDrives::Flux { drives: flux },
                (true, false) => SegmentDrives::Charge { drives: charge },
                (false, false) => {
                    return Err(anyhow!(
                        "schedule segment {i}: flux and charge drives cannot share one segment"
                    ))
                }
            };
            schedule.segments.push(Segment {
                t0: schedule.total_duration(),
                t1: schedule.total_duration() + seg.duration,
                drives,
            });
        }
        Ok(schedule)
    }
}

// ----------------------------------------------------------------- loader

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read configuration file {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed configuration in {}", path.display()))
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
