use super::ExperimentError;
use crate::fidelity::Variant;
use crate::markets::GenerateParams;
use crate::predictors::EstimateSource;
use crate::textio::{TextDoc, TextError};

pub const SPEC_KIND: &str = "ppsm-sweep";

/// Parameter grid and instance family of one sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub alphas: Vec<f64>,
    pub etas: Vec<f64>,
    pub stress_e: Vec<f64>,
    pub stress_g: Vec<f64>,
    pub variants: Vec<Variant>,
    pub repetitions: u64,
    pub base_seed: u64,
    pub n_gen: usize,
    pub n_gfpp: usize,
    pub n_gas_nodes: usize,
    pub n_periods: usize,
    pub epsilon: f64,
    pub leader_noise: f64,
    pub follower_noise: f64,
    pub source: EstimateSource,
    pub node_limit: usize,
    /// Wall-clock budget of one fidelity solve, seconds.
    pub time_budget: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            alphas: vec![10.0, 100.0, 1000.0],
            etas: vec![0.1],
            stress_e: vec![1.0, 1.1, 1.2, 1.3],
            stress_g: vec![1.1, 1.5, 1.9, 2.3],
            variants: Variant::ALL.to_vec(),
            repetitions: 30,
            base_seed: 2024,
            n_gen: 6,
            n_gfpp: 3,
            n_gas_nodes: 6,
            n_periods: 1,
            epsilon: 1.0,
            leader_noise: 0.10,
            follower_noise: 0.0,
            source: EstimateSource::ReleasedOutcomes,
            node_limit: 20_000,
            time_budget: 60.0,
        }
    }
}

fn positive(name: &str, v: &[f64]) -> Result<(), ExperimentError> {
    if v.is_empty() {
        return Err(ExperimentError::Spec(format!("{name} is empty")));
    }
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(ExperimentError::Spec(format!("{name} has a negative or non-finite value")));
    }
    Ok(())
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        positive("alphas", &self.alphas)?;
        positive("etas", &self.etas)?;
        positive("stress_e", &self.stress_e)?;
        positive("stress_g", &self.stress_g)?;
        if self.alphas.contains(&0.0) || self.stress_e.contains(&0.0) {
            return Err(ExperimentError::Spec("alphas and stress_e must be positive".into()));
        }
        if self.variants.is_empty() {
            return Err(ExperimentError::Spec("variants is empty".into()));
        }
        if self.repetitions == 0 {
            return Err(ExperimentError::Spec("repetitions must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.time_budget > 0.0) {
            return Err(ExperimentError::Spec("epsilon and time_budget must be positive".into()));
        }
        positive("noise", &[self.leader_noise, self.follower_noise])
    }

    pub fn generate_params(&self, stress_e: f64, stress_g: f64) -> GenerateParams {
        GenerateParams {
            n_gen: self.n_gen,
            n_gfpp: self.n_gfpp,
            n_gas_nodes: self.n_gas_nodes,
            n_periods: self.n_periods,
            stress_e,
            stress_g,
        }
    }

    /// Number of mechanism runs in the sweep.
    pub fn num_runs(&self) -> usize {
        self.alphas.len()
            * self.etas.len()
            * self.stress_e.len()
            * self.stress_g.len()
            * self.variants.len()
            * self.repetitions as usize
    }

    pub fn to_doc(&self) -> TextDoc {
        let mut d = TextDoc::new(SPEC_KIND);
        d.vector("alphas", &self.alphas);
        d.vector("etas", &self.etas);
        d.vector("stress_e", &self.stress_e);
        d.vector("stress_g", &self.stress_g);
        let names: Vec<&str> = self.variants.iter().map(|v| v.name()).collect();
        d.text("variants", &names.join(","));
        d.scalar("repetitions", self.repetitions as f64);
        d.text("base_seed", &self.base_seed.to_string());
        d.scalar("n_gen", self.n_gen as f64);
        d.scalar("n_gfpp", self.n_gfpp as f64);
        d.scalar("n_gas_nodes", self.n_gas_nodes as f64);
        d.scalar("n_periods", self.n_periods as f64);
        d.scalar("epsilon", self.epsilon);
        d.scalar("leader_noise", self.leader_noise);
        d.scalar("follower_noise", self.follower_noise);
        d.text("source", self.source.name());
        d.scalar("node_limit", self.node_limit as f64);
        d.scalar("time_budget", self.time_budget);
        d
    }

    /// Missing entries keep their defaults.
    pub fn from_doc(doc: &TextDoc) -> Result<Self, ExperimentError> {
        doc.expect_kind(SPEC_KIND)?;
        let mut s = Self::default();
        let vec = |name: &str, into: &mut Vec<f64>| -> Result<(), TextError> {
            if doc.get(name).is_some() {
                *into = doc.get_vector(name)?.to_vec();
            }
            Ok(())
        };
        vec("alphas", &mut s.alphas)?;
        vec("etas", &mut s.etas)?;
        vec("stress_e", &mut s.stress_e)?;
        vec("stress_g", &mut s.stress_g)?;
        if doc.get("variants").is_some() {
            s.variants = doc
                .get_text("variants")?
                .split(',')
                .map(|n| Variant::parse(n.trim()).ok_or_else(|| ExperimentError::Spec(format!("unknown variant `{n}`"))))
                .collect::<Result<_, _>>()?;
        }
        let size = |name: &str, into: &mut usize| -> Result<(), TextError> {
            if doc.get(name).is_some() {
                *into = doc.get_usize(name)?;
            }
            Ok(())
        };
        let mut reps = s.repetitions as usize;
        size("repetitions", &mut reps)?;
        s.repetitions = reps as u64;
        size("n_gen", &mut s.n_gen)?;
        size("n_gfpp", &mut s.n_gfpp)?;
        size("n_gas_nodes", &mut s.n_gas_nodes)?;
        size("n_periods", &mut s.n_periods)?;
        size("node_limit", &mut s.node_limit)?;
        let real = |name: &str, into: &mut f64| -> Result<(), TextError> {
            if doc.get(name).is_some() {
                *into = doc.get_scalar(name)?;
            }
            Ok(())
        };
        real("epsilon", &mut s.epsilon)?;
        real("leader_noise", &mut s.leader_noise)?;
        real("follower_noise", &mut s.follower_noise)?;
        real("time_budget", &mut s.time_budget)?;
        if doc.get("base_seed").is_some() {
            s.base_seed = doc
                .get_text("base_seed")?
                .parse()
                .map_err(|_| ExperimentError::Spec("base_seed is not an unsigned integer".into()))?;
        }
        if doc.get("source").is_some() {
            let name = doc.get_text("source")?;
            s.source = EstimateSource::parse(name).ok_or_else(|| ExperimentError::Spec(format!("unknown source `{name}`")))?;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn to_text(&self) -> String {
        self.to_doc().render()
    }

    pub fn from_text(src: &str) -> Result<Self, ExperimentError> {
        Self::from_doc(&TextDoc::parse(src)?)
    }
}
