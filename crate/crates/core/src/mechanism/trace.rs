use super::{PpsmConfig, Trace};
use crate::markets::MarketInstance;
use crate::textio::TextDoc;

pub const TRACE_KIND: &str = "ppsm-trace";

fn bits(v: &[bool]) -> Vec<f64> {
    v.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

/// The instance followed by one block per mechanism step.
pub fn trace_doc(inst: &MarketInstance, cfg: &PpsmConfig, trace: &Trace) -> TextDoc {
    let mut doc = inst.to_doc();
    doc.kind = TRACE_KIND.to_string();
    doc.text("variant", trace.variant.name());
    doc.scalar("alpha", cfg.privacy.alpha);
    doc.scalar("epsilon", cfg.privacy.epsilon);
    doc.scalar("eta_p_pct", cfg.eta_p_pct);
    doc.scalar("eta_d_pct", cfg.eta_d_pct);
    doc.text("seed", &cfg.seed.to_string());
    doc.vector("step1_obfuscated", trace.obfuscated.values());
    doc.vector("step1_noise", trace.obfuscated.noise());
    if let Some(y) = &trace.leader_prices {
        doc.vector("step2_leader_prices", y);
        doc.text("step2_fallback", if trace.leader_fallback { "yes" } else { "no" });
    }
    if let Some(x) = &trace.commitment {
        doc.vector("step2_commitment", &bits(x));
    }
    if let Some(e) = &trace.estimates {
        doc.scalar("step3_objective_estimate", e.objective);
        doc.vector("step3_dual_estimates", &e.duals);
        doc.scalar("step3_eta_p", trace.eta_p);
        doc.scalar("step3_eta_d", trace.eta_d);
    }
    if let Some(r) = &trace.fidelity {
        doc.text("step3_status", r.status.name());
        doc.vector("step3_d_hat", &r.d_hat);
        doc.vector("step3_duals", &r.follower_duals);
        doc.scalar("step3_nodes", r.nodes as f64);
    }
    if let Some(d) = &trace.release {
        doc.vector("release", d);
    }
    doc
}
