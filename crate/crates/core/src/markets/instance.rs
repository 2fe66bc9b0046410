use crate::lp::Matrix;
use crate::textio::{TextDoc, TextError};

pub const INSTANCE_KIND: &str = "ppsm-instance";

/// Sizes of a market instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub n_gen: usize,
    pub n_gfpp: usize,
    pub n_buses: usize,
    pub n_lines: usize,
    pub n_gas_nodes: usize,
    pub n_suppliers: usize,
    pub n_pipes: usize,
    pub n_periods: usize,
}

impl Dims {
    /// Length of a nodal gas vector (demand or prices), period-major.
    pub fn gas_len(&self) -> usize {
        self.n_gas_nodes * self.n_periods
    }
}

/// Everything the leader, the electricity market and the gas market may share.
///
/// Generators `n_gen - n_gfpp ..` are gas-fired. Gas vectors are laid out
/// period-major: entry `t * n_gas_nodes + node`.
#[derive(Clone, Debug, PartialEq)]
pub struct PublicMarket {
    pub dims: Dims,
    pub stress_e: f64,
    pub stress_g: f64,

    // leader (unit commitment)
    pub commit_cost: Vec<f64>,
    /// Committed capacity must cover `reserve_factor` times the load in every period.
    pub reserve_factor: f64,

    // electricity market
    pub gen_bus: Vec<usize>,
    pub gen_pmin: Vec<f64>,
    pub gen_pmax: Vec<f64>,
    pub gen_cost: Vec<f64>,
    pub gen_ramp: Vec<f64>,
    /// Bus loads after electricity stress, `n_buses × n_periods`.
    pub bus_load: Matrix,
    pub line_from: Vec<usize>,
    pub line_to: Vec<usize>,
    pub line_cap: Vec<f64>,

    // coupling and bid validity
    pub gfpp_node: Vec<usize>,
    pub heat_rate: Vec<f64>,
    /// Highest gas price at which the GFPP's electricity bid stays profitable.
    pub breakeven_price: Vec<f64>,
    /// Big-M of the bid-validity rows; exceeds any attainable gas price.
    pub validity_m: f64,

    // gas market
    pub supplier_node: Vec<usize>,
    pub supplier_cap: Vec<f64>,
    pub supplier_cost: Vec<f64>,
    pub pipe_from: Vec<usize>,
    pub pipe_to: Vec<usize>,
    pub pipe_cap: Vec<f64>,
}

/// The sensitive nodal gas demand. Only the obfuscation step and verification
/// code read it.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitiveDemand(Vec<f64>);

impl SensitiveDemand {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarketInstance {
    pub public: PublicMarket,
    pub sensitive: SensitiveDemand,
}

impl PublicMarket {
    pub fn gfpp_gen(&self, k: usize) -> usize {
        self.dims.n_gen - self.dims.n_gfpp + k
    }

    pub fn load(&self, bus: usize, t: usize) -> f64 {
        self.bus_load.get(bus, t)
    }

    pub fn total_load(&self, t: usize) -> f64 {
        (0..self.dims.n_buses).map(|b| self.load(b, t)).sum()
    }

    pub fn max_supplier_cost(&self) -> f64 {
        self.supplier_cost.iter().fold(0.0, |m, v| m.max(*v))
    }

    /// Total supply that could reach any single node, used to clip demand estimates.
    pub fn node_capacity(&self) -> f64 {
        self.supplier_cap.iter().sum()
    }

    pub fn validate(&self) -> Result<(), String> {
        let d = &self.dims;
        let checks = [
            (self.commit_cost.len() == d.n_gen, "commit_cost"),
            (self.gen_bus.len() == d.n_gen, "gen_bus"),
            (self.gen_pmin.len() == d.n_gen, "gen_pmin"),
            (self.gen_pmax.len() == d.n_gen, "gen_pmax"),
            (self.gen_cost.len() == d.n_gen, "gen_cost"),
            (self.gen_ramp.len() == d.n_gen, "gen_ramp"),
            (self.bus_load.nrows() == d.n_buses && self.bus_load.ncols() == d.n_periods, "bus_load"),
            (self.line_from.len() == d.n_lines && self.line_to.len() == d.n_lines, "lines"),
            (self.line_cap.len() == d.n_lines, "line_cap"),
            (self.gfpp_node.len() == d.n_gfpp, "gfpp_node"),
            (self.heat_rate.len() == d.n_gfpp, "heat_rate"),
            (self.breakeven_price.len() == d.n_gfpp, "breakeven_price"),
            (self.supplier_node.len() == d.n_suppliers, "supplier_node"),
            (self.supplier_cap.len() == d.n_suppliers, "supplier_cap"),
            (self.supplier_cost.len() == d.n_suppliers, "supplier_cost"),
            (self.pipe_from.len() == d.n_pipes && self.pipe_to.len() == d.n_pipes, "pipes"),
            (self.pipe_cap.len() == d.n_pipes, "pipe_cap"),
            (d.n_gfpp <= d.n_gen, "n_gfpp"),
            (self.gen_bus.iter().all(|&b| b < d.n_buses), "gen_bus range"),
            (self.gfpp_node.iter().all(|&n| n < d.n_gas_nodes), "gfpp_node range"),
            (self.supplier_node.iter().all(|&n| n < d.n_gas_nodes), "supplier_node range"),
            (
                self.pipe_from.iter().chain(&self.pipe_to).all(|&n| n < d.n_gas_nodes),
                "pipe range",
            ),
            (
                self.line_from.iter().chain(&self.line_to).all(|&b| b < d.n_buses),
                "line range",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, what)) => Err(format!("inconsistent dimension: {what}")),
            None => Ok(()),
        }
    }
}

fn idx(v: &[usize]) -> Vec<f64> {
    v.iter().map(|&i| i as f64).collect()
}

fn unidx(doc: &TextDoc, name: &str) -> Result<Vec<usize>, TextError> {
    doc.get_vector(name)?
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(TextError::WrongType(name.to_string()))
            }
        })
        .collect()
}

impl PublicMarket {
    pub fn write_into(&self, doc: &mut TextDoc) {
        let d = &self.dims;
        for (k, v) in [
            ("n_gen", d.n_gen),
            ("n_gfpp", d.n_gfpp),
            ("n_buses", d.n_buses),
            ("n_lines", d.n_lines),
            ("n_gas_nodes", d.n_gas_nodes),
            ("n_suppliers", d.n_suppliers),
            ("n_pipes", d.n_pipes),
            ("n_periods", d.n_periods),
        ] {
            doc.scalar(k, v as f64);
        }
        doc.scalar("stress_e", self.stress_e);
        doc.scalar("stress_g", self.stress_g);
        doc.vector("commit_cost", &self.commit_cost);
        doc.scalar("reserve_factor", self.reserve_factor);
        doc.vector("gen_bus", &idx(&self.gen_bus));
        doc.vector("gen_pmin", &self.gen_pmin);
        doc.vector("gen_pmax", &self.gen_pmax);
        doc.vector("gen_cost", &self.gen_cost);
        doc.vector("gen_ramp", &self.gen_ramp);
        doc.matrix("bus_load", &self.bus_load);
        doc.vector("line_from", &idx(&self.line_from));
        doc.vector("line_to", &idx(&self.line_to));
        doc.vector("line_cap", &self.line_cap);
        doc.vector("gfpp_node", &idx(&self.gfpp_node));
        doc.vector("heat_rate", &self.heat_rate);
        doc.vector("breakeven_price", &self.breakeven_price);
        doc.scalar("validity_m", self.validity_m);
        doc.vector("supplier_node", &idx(&self.supplier_node));
        doc.vector("supplier_cap", &self.supplier_cap);
        doc.vector("supplier_cost", &self.supplier_cost);
        doc.vector("pipe_from", &idx(&self.pipe_from));
        doc.vector("pipe_to", &idx(&self.pipe_to));
        doc.vector("pipe_cap", &self.pipe_cap);
    }

    pub fn read_from(doc: &TextDoc) -> Result<Self, TextError> {
        let dims = Dims {
            n_gen: doc.get_usize("n_gen")?,
            n_gfpp: doc.get_usize("n_gfpp")?,
            n_buses: doc.get_usize("n_buses")?,
            n_lines: doc.get_usize("n_lines")?,
            n_gas_nodes: doc.get_usize("n_gas_nodes")?,
            n_suppliers: doc.get_usize("n_suppliers")?,
            n_pipes: doc.get_usize("n_pipes")?,
            n_periods: doc.get_usize("n_periods")?,
        };
        let v = |n: &str| doc.get_vector(n).map(|x| x.to_vec());
        let p = PublicMarket {
            dims,
            stress_e: doc.get_scalar("stress_e")?,
            stress_g: doc.get_scalar("stress_g")?,
            commit_cost: v("commit_cost")?,
            reserve_factor: doc.get_scalar("reserve_factor")?,
            gen_bus: unidx(doc, "gen_bus")?,
            gen_pmin: v("gen_pmin")?,
            gen_pmax: v("gen_pmax")?,
            gen_cost: v("gen_cost")?,
            gen_ramp: v("gen_ramp")?,
            bus_load: doc.get_matrix("bus_load")?.clone(),
            line_from: unidx(doc, "line_from")?,
            line_to: unidx(doc, "line_to")?,
            line_cap: v("line_cap")?,
            gfpp_node: unidx(doc, "gfpp_node")?,
            heat_rate: v("heat_rate")?,
            breakeven_price: v("breakeven_price")?,
            validity_m: doc.get_scalar("validity_m")?,
            supplier_node: unidx(doc, "supplier_node")?,
            supplier_cap: v("supplier_cap")?,
            supplier_cost: v("supplier_cost")?,
            pipe_from: unidx(doc, "pipe_from")?,
            pipe_to: unidx(doc, "pipe_to")?,
            pipe_cap: v("pipe_cap")?,
        };
        p.validate().map_err(|m| TextError::Parse { line: 0, msg: m })?;
        Ok(p)
    }
}

impl MarketInstance {
    pub fn to_doc(&self) -> TextDoc {
        let mut doc = TextDoc::new(INSTANCE_KIND);
        self.public.write_into(&mut doc);
        doc.vector("sensitive_demand", self.sensitive.values());
        doc
    }

    pub fn from_doc(doc: &TextDoc) -> Result<Self, TextError> {
        doc.expect_kind(INSTANCE_KIND)?;
        let public = PublicMarket::read_from(doc)?;
        let demand = doc.get_vector("sensitive_demand")?.to_vec();
        if demand.len() != public.dims.gas_len() {
            return Err(TextError::WrongType("sensitive_demand".into()));
        }
        Ok(Self {
            public,
            sensitive: SensitiveDemand::new(demand),
        })
    }

    pub fn to_text(&self) -> String {
        self.to_doc().render()
    }

    pub fn from_text(s: &str) -> Result<Self, TextError> {
        Self::from_doc(&TextDoc::parse(s)?)
    }
}
