//! Energy estimate per layer:
//! `E = E_ml·(D_wi + D_wo) + E_me·D_wk + E_mul·M_W + E_add·(S_W + S_B + S_A)`.

use crate::engine::network::{LayerSpec, NetworkSpec};
use crate::error::{Error, Result};
use crate::model::counts::{add_counts, mult_count, volumes, AddCountVariant, AddCounts, Volumes};
use crate::transform::WinogradPlan;

/// Unit energies in arbitrary but consistent units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    /// External-memory access.
    pub e_me: f64,
    /// Local-memory access.
    pub e_ml: f64,
    pub e_mul: f64,
    pub e_add: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            e_me: 200.0,
            e_ml: 6.0,
            e_mul: 2.0,
            e_add: 1.0,
        }
    }
}

impl EnergyParams {
    /// Requires `E_me > E_ml > E_mul ≥ E_add > 0`.
    pub fn validate(&self) -> Result<()> {
        let ok = self.e_me > self.e_ml
            && self.e_ml > self.e_mul
            && self.e_mul >= self.e_add
            && self.e_add > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "energies must satisfy E_me > E_ml > E_mul >= E_add > 0, got {self:?}"
            )))
        }
    }
}

/// Counts and energy of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerModel {
    pub name: String,
    pub volumes: Volumes,
    pub m_w: u64,
    pub adds: AddCounts,
    pub e_tot: f64,
}

/// Evaluates the energy formula on given counts.
pub fn energy_of(v: &Volumes, m_w: u64, a: &AddCounts, ep: &EnergyParams) -> f64 {
    ep.e_ml * (v.d_wi + v.d_wo) as f64
        + ep.e_me * v.d_wk as f64
        + ep.e_mul * m_w as f64
        + ep.e_add * (a.s_w + a.s_b + a.s_a) as f64
}

pub fn model_layer(
    layer: &LayerSpec,
    plan: &WinogradPlan,
    ep: &EnergyParams,
    variant: AddCountVariant,
) -> LayerModel {
    let v = volumes(layer, plan.m(), plan.r());
    let m_w = mult_count(layer, plan.m(), plan.r());
    let adds = add_counts(layer, plan, variant);
    LayerModel {
        name: layer.name.clone(),
        volumes: v,
        m_w,
        adds,
        e_tot: energy_of(&v, m_w, &adds, ep),
    }
}

/// `E_tot` of one layer with the joint (`C·K`) add counts.
pub fn energy(layer: &LayerSpec, plan: &WinogradPlan, ep: &EnergyParams) -> Result<f64> {
    ep.validate()?;
    Ok(model_layer(layer, plan, ep, AddCountVariant::Joint).e_tot)
}

/// Per-layer models of every convolution plus network totals.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelReport {
    pub layers: Vec<LayerModel>,
    pub total: LayerModel,
}

pub fn model_network(
    net: &NetworkSpec,
    plan: &WinogradPlan,
    ep: &EnergyParams,
    variant: AddCountVariant,
) -> Result<ModelReport> {
    ep.validate()?;
    let layers: Vec<LayerModel> = net
        .convs()
        .map(|l| model_layer(l, plan, ep, variant))
        .collect();
    let mut total = LayerModel {
        name: "total".into(),
        volumes: Volumes::default(),
        m_w: 0,
        adds: AddCounts::default(),
        e_tot: 0.0,
    };
    for l in &layers {
        total.volumes.d_wi += l.volumes.d_wi;
        total.volumes.d_wo += l.volumes.d_wo;
        total.volumes.d_wk += l.volumes.d_wk;
        total.m_w += l.m_w;
        total.adds.s_w += l.adds.s_w;
        total.adds.s_b += l.adds.s_b;
        total.adds.s_a += l.adds.s_a;
        total.e_tot += l.e_tot;
    }
    Ok(ModelReport { layers, total })
}
