//! Static analysis: CFG construction, dominance, points-to, critical
//! variable expansion, instrumentation-site selection, and the exported
//! verifier bundle.

pub mod bundle;
pub mod cfg;
pub mod critical;
pub mod dominance;
pub mod points_to;
pub mod sites;

pub use bundle::{AnalysisBundle, BundleBlock, BundleFunction, BundleMarker, BundleTerm};
pub use cfg::{build_cfg, Cfg, EdgeKind};
pub use critical::{expand_critical_set, CriticalSet, Provenance};
pub use dominance::{compute_dominators, compute_post_dominators};
pub use points_to::{points_to, NodeMap, Obj, PointsTo};
pub use sites::{
    check_operation_scopes, count_address_based_sites, select_sites, target_sets, ControlKind,
    ControlSite, DataKind, DataSite, OperationScope, SiteList, TargetSets,
};

use crate::diag::Diagnostic;
use crate::mini_ir::{InstOp, Program, TermOp};

/// Full analysis result for one program.
pub struct Analysis {
    pub cfgs: Vec<Cfg>,
    pub points_to: PointsTo,
    pub critical: CriticalSet,
    pub scopes: Vec<OperationScope>,
    pub target_sets: TargetSets,
    pub sites: SiteList,
    pub bundle: AnalysisBundle,
}

/// Runs every analysis stage in order. `source` is only hashed into the
/// bundle so verifiers can detect drift; pass the canonical program text.
pub fn analyze(program: &Program, source: &str) -> Result<Analysis, Vec<Diagnostic>> {
    let cfgs = build_cfg(program);
    let scopes = check_operation_scopes(program, &cfgs)?;
    let pt = points_to(program);
    let auto = critical::detect_control_dependent_vars(program, &pt.nodes);
    let annotated = critical::annotated_vars(program, &pt.nodes);
    let critical = expand_critical_set(program, &auto, &annotated, &pt);
    let targets = target_sets(program, &pt);
    let sites = select_sites(program, &cfgs, &scopes, &critical, &pt);
    let bundle = export_bundle(program, source, &scopes, &targets, &sites);
    Ok(Analysis {
        cfgs,
        points_to: pt,
        critical,
        scopes,
        target_sets: targets,
        sites,
        bundle,
    })
}

fn export_bundle(
    program: &Program,
    source: &str,
    scopes: &[OperationScope],
    targets: &TargetSets,
    sites: &SiteList,
) -> AnalysisBundle {
    let mut functions = Vec::new();
    for f in &program.functions {
        let block_addr = |label: u32| f.blocks[label as usize].addr();
        let mut blocks = Vec::new();
        for b in &f.blocks {
            let mut markers = Vec::new();
            for inst in &b.body {
                match inst.op {
                    InstOp::AttestBegin { op_id } => {
                        markers.push(BundleMarker { addr: inst.addr, op_id, is_begin: true })
                    }
                    InstOp::AttestEnd { op_id } => {
                        markers.push(BundleMarker { addr: inst.addr, op_id, is_begin: false })
                    }
                    _ => {}
                }
            }
            let term = match &b.term.op {
                TermOp::DirectCall { func, cont, .. } => BundleTerm::DirectCall {
                    callee_entry: program.functions[*func as usize].entry_addr(),
                    cont: block_addr(*cont),
                },
                TermOp::IndirectCall { cont, .. } => {
                    BundleTerm::IndirectCall { cont: block_addr(*cont) }
                }
                TermOp::DirectJump { target } => {
                    BundleTerm::DirectJump { dest: block_addr(*target) }
                }
                TermOp::IndirectJump { .. } => BundleTerm::IndirectJump,
                TermOp::CondBranch { taken, not_taken, .. } => BundleTerm::CondBranch {
                    taken: block_addr(*taken),
                    not_taken: block_addr(*not_taken),
                },
                TermOp::Return { .. } => BundleTerm::Return,
                TermOp::Halt => BundleTerm::Halt,
            };
            blocks.push(BundleBlock {
                start: b.addr(),
                markers,
                term_addr: b.term.addr,
                term,
            });
        }
        functions.push(BundleFunction {
            name: f.name.clone(),
            entry: f.entry_addr(),
            blocks,
        });
    }
    AnalysisBundle {
        functions,
        scopes: scopes.to_vec(),
        target_sets: targets.clone(),
        vector_table: program
            .vectors
            .iter()
            .map(|(irq, f)| (*irq, program.functions[*f as usize].entry_addr()))
            .collect(),
        sites: sites.clone(),
        address_site_count: count_address_based_sites(program),
        source_digest: bundle::source_digest(source),
    }
}
