//! Everything computed for one scenario, in one serializable document.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{self, CruisingShare, FixedPointOptions, Network, NetworkFlows};
use crate::pricing::{self, PricingSolution};
use crate::scenario::{Calibration, Scenario};
use crate::simulate::{self, OccupancyGap, SimConfig, SimResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMode {
    /// Exogenous demand in, fixed point out.
    Forward,
    /// Observed occupancy in, inferred demand out.
    Estimate,
}

impl FlowMode {
    /// `Estimate` when every block has an observed occupancy, else `Forward`
    /// when every block has demand.
    pub fn infer(scenario: &Scenario) -> Option<Self> {
        if scenario.blocks.is_empty() {
            None
        } else if scenario.blocks.iter().all(|b| b.observed_u.is_some()) {
            Some(FlowMode::Estimate)
        } else if scenario.blocks.iter().all(|b| b.lambda.is_some()) {
            Some(FlowMode::Forward)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSection {
    pub mode: FlowMode,
    pub flows: NetworkFlows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingSection {
    pub solution: PricingSolution,
    pub baseline_prices: Vec<f64>,
    pub baseline_occupancies: Vec<f64>,
    pub baseline_rejections: Vec<f64>,
    pub excluded: Vec<String>,
    pub calibration: Vec<Calibration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSection {
    pub config: SimConfig,
    pub result: SimResult,
    /// Against the analytic flows, when those were solved.
    pub comparison: Vec<OccupancyGap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    /// SHA-256 of the echoed scenario.
    pub input_hash: String,
    /// Fully resolved input; loading it back reproduces `input_hash`.
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flows: Option<FlowSection>,
    #[serde(default)]
    pub cruising: Vec<CruisingShare>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pricing: Option<PricingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSection>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    pub mode: Option<FlowMode>,
    pub fixed_point: FixedPointOptions,
    pub optimize: bool,
    /// Overrides the scenario's simulation block. `None` runs it when present.
    pub sim: Option<SimConfig>,
    pub simulate: bool,
}

impl ReportOptions {
    pub fn full() -> Self {
        Self {
            optimize: true,
            simulate: true,
            ..Default::default()
        }
    }
}

impl Report {
    pub fn new(scenario: Scenario) -> Result<Self> {
        let input_hash = scenario.content_hash()?;
        let warnings = scenario.warnings();
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            input_hash,
            scenario,
            flows: None,
            cruising: Vec::new(),
            pricing: None,
            sim: None,
            warnings,
        })
    }

    pub fn flows(&self) -> Result<&NetworkFlows> {
        self.flows
            .as_ref()
            .map(|f| &f.flows)
            .ok_or_else(|| Error::MissingResult("report has no network solution".into()))
    }

    pub fn solve_flows(&mut self, mode: FlowMode, opts: &FixedPointOptions) -> Result<()> {
        let net = self.scenario.network()?;
        let flows = match mode {
            FlowMode::Forward => net.forward_solve(opts)?,
            FlowMode::Estimate => net.estimate_from_occupancy()?,
        };
        for c in &flows.clamped {
            self.warnings.push(format!(
                "block {}: inferred exogenous demand was negative by {:e}, clamped to zero",
                c.block, c.residual
            ));
        }
        self.cruising.clear();
        for b in self.scenario.blocks.iter().filter(|b| b.through_traffic.is_some()) {
            let share = network::cruising_share(&flows, b)?;
            if share.out_of_range {
                self.warnings.push(format!(
                    "block {}: circulating inflow {} exceeds observed through-traffic {}",
                    share.block, share.inflow, share.through_traffic
                ));
            }
            self.cruising.push(share);
        }
        self.flows = Some(FlowSection { mode, flows });
        Ok(())
    }

    pub fn optimize(&mut self) -> Result<()> {
        let pricing = self
            .scenario
            .pricing()?
            .ok_or_else(|| Error::MissingResult("no block has a price slope to optimize".into()))?;
        let solution = pricing::optimize_prices(&pricing.problem)?;
        let by_id = |id: &str| self.scenario.blocks.iter().find(|b| b.id == id);
        let mut baseline_occupancies = Vec::new();
        let mut baseline_rejections = Vec::new();
        for (pb, p0) in pricing.problem.blocks.iter().zip(&pricing.baseline_prices) {
            let observed = by_id(&pb.id).and_then(|b| b.observed_u);
            let u = match observed {
                Some(u) => u,
                None => pricing::occupancy_of_price(&pb.model, p0.clamp(pb.model.p_min(), pb.model.p_max()))?,
            };
            baseline_occupancies.push(u);
            baseline_rejections.push(pricing::rejection_at_occupancy(pb.params, u)?);
        }
        self.warnings.extend(pricing.warnings);
        self.pricing = Some(PricingSection {
            solution,
            baseline_prices: pricing.baseline_prices,
            baseline_occupancies,
            baseline_rejections,
            excluded: pricing.excluded,
            calibration: self.scenario.calibration.clone(),
        });
        Ok(())
    }

    /// Simulate with the scenario's demand, or with inferred demand when the
    /// flows came from observed occupancies.
    pub fn simulate(&mut self, config: &SimConfig) -> Result<()> {
        let net = self.simulation_network()?;
        let result = simulate::replicate(&net, config)?;
        let comparison = match &self.flows {
            Some(f) => simulate::compare_occupancy(&result, &f.flows)?,
            None => Vec::new(),
        };
        if result.accounting.circulating > 0 {
            log::info!(
                "{} drivers still circulating at the horizon",
                result.accounting.circulating
            );
        }
        self.sim = Some(SimSection {
            config: config.clone(),
            result,
            comparison,
        });
        Ok(())
    }

    fn simulation_network(&self) -> Result<Network> {
        let mut blocks = self.scenario.blocks.clone();
        if blocks.iter().any(|b| b.lambda.is_none()) {
            let inferred = self
                .flows
                .as_ref()
                .and_then(|f| f.flows.lambda_inferred.as_ref().map(|l| (&f.flows, l)))
                .ok_or_else(|| {
                    Error::MissingResult(
                        "simulation needs lambda for every block or an occupancy estimate".into(),
                    )
                })?;
            let (flows, lambda) = inferred;
            for b in blocks.iter_mut().filter(|b| b.lambda.is_none()) {
                let i = flows.index_of(&b.id).ok_or_else(|| {
                    Error::MissingResult(format!("block {} has no inferred demand", b.id))
                })?;
                b.lambda = Some(lambda[i]);
            }
        }
        Network::new(&self.scenario.graph(), &blocks)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Solve, price and simulate whatever the scenario supports.
pub fn build_report(scenario: Scenario, opts: &ReportOptions) -> Result<Report> {
    let mut report = Report::new(scenario)?;
    match opts.mode.or_else(|| FlowMode::infer(&report.scenario)) {
        Some(mode) => report.solve_flows(mode, &opts.fixed_point)?,
        None => report
            .warnings
            .push("neither demand nor occupancy is known for every block; network not solved".into()),
    }
    if opts.optimize && report.scenario.pricing()?.is_some() {
        report.optimize()?;
    }
    if opts.simulate {
        if let Some(cfg) = opts.sim.clone().or_else(|| report.scenario.sim.clone()) {
            report.simulate(&cfg)?;
        }
    }
    Ok(report)
}
