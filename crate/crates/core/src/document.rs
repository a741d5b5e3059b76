//! The on-disk instance format: a single self-describing JSON document with
//! named spaces, sequences, kernels, measures, functions, sets, and base
//! families, all cross-referenced by name.
//!
//! Numbers are serialized as shortest-round-trip decimals (serde_json uses
//! ryu), so a written document reads back into bit-identical doubles and
//! `generate -> write -> read -> analyze` equals the in-memory analysis
//! exactly.
//!
//! [`validate`] checks the schema and every module-level invariant and
//! reports all violations with document path locators; [`resolve`] builds
//! the in-memory objects once validation is clean.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::{default_witnesses, BaseFamily, WitnessSet};
use crate::kernel::{family_from_param, JointMeasure, KernelFamily, ParamKernel};
use crate::kr::RealFunction;
use crate::measure::Measure;
use crate::space::{ConvergentSequence, FiniteMetricSpace, SetRole, SpaceRef, TestSet};
use crate::Error;

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpaceDoc {
    pub point_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<Vec<f64>>>,
    pub metric: Vec<Vec<f64>>,
    /// "euclidean" asserts that the metric equals pairwise distances of the
    /// coordinates; anything else (or absence) declares an explicit metric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_kind: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SequenceDoc {
    pub space: String,
    pub entries: Vec<String>,
    pub limit: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TableEntryDoc {
    pub s3: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s4: Option<String>,
    pub mass: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelDoc {
    /// An explicit indexed family `P_1..P_N -> P`.
    Family {
        s1_space: String,
        s2_space: String,
        joints: Vec<Vec<Vec<f64>>>,
        limit: Vec<Vec<f64>>,
    },
    /// A table over a parameter space (optionally times an auxiliary space).
    Param {
        s1_space: String,
        s2_space: String,
        param_space: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s4_space: Option<String>,
        table: Vec<TableEntryDoc>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MeasureDoc {
    pub space: String,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FunctionDoc {
    pub space: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TestSetDoc {
    pub space: String,
    pub members: Vec<String>,
    /// "open" | "closed" | "continuity"
    pub role: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BaseEntryDoc {
    pub limit_point: String,
    /// Names of test sets (role open) forming the base at this limit point.
    pub sets: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BaseFamilyDoc {
    pub space: String,
    pub entries: Vec<BaseEntryDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct AnalysisTargetDoc {
    /// Name of an explicit family kernel...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    /// ... or a param kernel plus the sequence to drive it along.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param_kernel: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s4_sequence: Option<String>,
    /// Witness selections by name; absent means "every matching object in
    /// the document", and an empty result falls back to generated defaults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functions: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lsc_functions: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open_sets: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_sets: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuity_sets: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_family: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct ConfigDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisTargetDoc>,
}

/// The whole instance document. Every map is name-keyed; references between
/// sections are by name and validated before any computation.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InstanceDocument {
    pub format_version: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub spaces: BTreeMap<String, SpaceDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sequences: BTreeMap<String, SequenceDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub kernels: BTreeMap<String, KernelDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub measures: BTreeMap<String, MeasureDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub test_functions: BTreeMap<String, FunctionDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub test_sets: BTreeMap<String, TestSetDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub base_families: BTreeMap<String, BaseFamilyDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ConfigDoc>,
}

impl Default for InstanceDocument {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION.to_string(),
            spaces: BTreeMap::new(),
            sequences: BTreeMap::new(),
            kernels: BTreeMap::new(),
            measures: BTreeMap::new(),
            test_functions: BTreeMap::new(),
            test_sets: BTreeMap::new(),
            base_families: BTreeMap::new(),
            config: None,
        }
    }
}

impl InstanceDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }
}

/// Why a document cannot be loaded at all (as opposed to being invalid).
#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read document: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse document: {0}")]
    Parse(#[from] serde_json::Error),
}

pub fn parse(text: &str) -> Result<InstanceDocument, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn load(path: &Path) -> Result<InstanceDocument, LoadError> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse(&text)?)
}

pub fn save(doc: &InstanceDocument, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, doc.to_json())
}

/// One invariant violation, with a document path locator.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Fully resolved in-memory objects from a valid document.
#[derive(Debug, Clone, Default)]
pub struct ResolvedInstance {
    pub spaces: BTreeMap<String, SpaceRef>,
    pub sequences: BTreeMap<String, ConvergentSequence>,
    pub param_kernels: BTreeMap<String, Arc<ParamKernel>>,
    pub families: BTreeMap<String, KernelFamily>,
    pub measures: BTreeMap<String, Measure>,
    pub functions: BTreeMap<String, RealFunction>,
    pub sets: BTreeMap<String, TestSet>,
    pub bases: BTreeMap<String, BaseFamily>,
}

struct Builder<'a> {
    doc: &'a InstanceDocument,
    out: ResolvedInstance,
    report: ValidationReport,
}

impl<'a> Builder<'a> {
    fn violation(&mut self, path: impl Into<String>, message: impl std::fmt::Display) {
        self.report.violations.push(Violation {
            path: path.into(),
            message: message.to_string(),
        });
    }

    fn space(&mut self, path: &str, name: &str) -> Option<SpaceRef> {
        match self.out.spaces.get(name) {
            Some(s) => Some(s.clone()),
            None => {
                self.violation(path, format!("unresolved reference to space {name:?}"));
                None
            }
        }
    }

    fn build_spaces(&mut self) {
        for (name, sd) in &self.doc.spaces {
            let path = format!("spaces.{name}");
            let euclidean = sd.metric_kind.as_deref() == Some("euclidean");
            match FiniteMetricSpace::new(
                sd.point_ids.clone(),
                sd.coords.clone(),
                sd.metric.clone(),
                euclidean,
            ) {
                Ok(space) => {
                    for v in space.validate() {
                        self.violation(&path, v);
                    }
                    self.out.spaces.insert(name.clone(), Arc::new(space));
                }
                Err(e) => self.violation(&path, e),
            }
        }
    }

    fn build_sequences(&mut self) {
        for (name, sd) in &self.doc.sequences {
            let path = format!("sequences.{name}");
            let Some(space) = self.space(&path, &sd.space) else {
                continue;
            };
            let entries: Vec<&str> = sd.entries.iter().map(String::as_str).collect();
            match ConvergentSequence::from_ids(space, &entries, &sd.limit) {
                Ok(seq) => {
                    if !seq.is_monotone() {
                        self.report.warnings.push(format!(
                            "{path}: distances to the limit are not nonincreasing"
                        ));
                    }
                    self.out.sequences.insert(name.clone(), seq);
                }
                Err(e) => self.violation(&path, e),
            }
        }
    }

    fn joint(
        &mut self,
        path: &str,
        s1: &SpaceRef,
        s2: &SpaceRef,
        mass: &[Vec<f64>],
    ) -> Option<JointMeasure> {
        match JointMeasure::new(s1.clone(), s2.clone(), mass.to_vec()) {
            Ok(j) => Some(j),
            Err(e) => {
                self.violation(path, e);
                None
            }
        }
    }

    fn build_kernels(&mut self) {
        for (name, kd) in &self.doc.kernels {
            let path = format!("kernels.{name}");
            match kd {
                KernelDoc::Family {
                    s1_space,
                    s2_space,
                    joints,
                    limit,
                } => {
                    let (Some(s1), Some(s2)) =
                        (self.space(&path, s1_space), self.space(&path, s2_space))
                    else {
                        continue;
                    };
                    let mut resolved = Vec::with_capacity(joints.len());
                    let mut ok = true;
                    for (i, mass) in joints.iter().enumerate() {
                        match self.joint(&format!("{path}.joints[{i}]"), &s1, &s2, mass) {
                            Some(j) => resolved.push(j),
                            None => ok = false,
                        }
                    }
                    let Some(lim) = self.joint(&format!("{path}.limit"), &s1, &s2, limit) else {
                        continue;
                    };
                    if !ok {
                        continue;
                    }
                    match KernelFamily::new(resolved, lim) {
                        Ok(f) => {
                            self.out.families.insert(name.clone(), f);
                        }
                        Err(e) => self.violation(&path, e),
                    }
                }
                KernelDoc::Param {
                    s1_space,
                    s2_space,
                    param_space,
                    s4_space,
                    table,
                } => {
                    let (Some(s1), Some(s2), Some(param)) = (
                        self.space(&path, s1_space),
                        self.space(&path, s2_space),
                        self.space(&path, param_space),
                    ) else {
                        continue;
                    };
                    let s4 = match s4_space {
                        Some(n) => match self.space(&path, n) {
                            Some(s) => Some(s),
                            None => continue,
                        },
                        None => None,
                    };
                    let s4_len = s4.as_ref().map_or(1, |s| s.len());
                    let mut slots: Vec<Option<JointMeasure>> = vec![None; param.len() * s4_len];
                    let mut ok = true;
                    for (i, entry) in table.iter().enumerate() {
                        let epath = format!("{path}.table[{i}]");
                        let Some(p_idx) = param.index_of(&entry.s3) else {
                            self.violation(
                                &epath,
                                format!("unknown parameter point {:?}", entry.s3),
                            );
                            ok = false;
                            continue;
                        };
                        let s4_idx = match (&s4, &entry.s4) {
                            (Some(s4s), Some(id)) => match s4s.index_of(id) {
                                Some(i) => i,
                                None => {
                                    self.violation(
                                        &epath,
                                        format!("unknown auxiliary point {id:?}"),
                                    );
                                    ok = false;
                                    continue;
                                }
                            },
                            (Some(_), None) => {
                                self.violation(&epath, "missing auxiliary point");
                                ok = false;
                                continue;
                            }
                            (None, Some(_)) => {
                                self.violation(&epath, "kernel has no auxiliary space");
                                ok = false;
                                continue;
                            }
                            (None, None) => 0,
                        };
                        match self.joint(&epath, &s1, &s2, &entry.mass) {
                            Some(j) => {
                                let slot = p_idx * s4_len + s4_idx;
                                if slots[slot].is_some() {
                                    self.violation(&epath, "duplicate table entry");
                                    ok = false;
                                } else {
                                    slots[slot] = Some(j);
                                }
                            }
                            None => ok = false,
                        }
                    }
                    if slots.iter().any(Option::is_none) {
                        self.violation(&path, "kernel table is missing parameter points");
                        ok = false;
                    }
                    if !ok {
                        continue;
                    }
                    let table: Vec<JointMeasure> = slots.into_iter().map(Option::unwrap).collect();
                    match ParamKernel::new(s1, s2, param, s4, table) {
                        Ok(k) => {
                            self.out.param_kernels.insert(name.clone(), Arc::new(k));
                        }
                        Err(e) => self.violation(&path, e),
                    }
                }
            }
        }
    }

    fn build_measures(&mut self) {
        for (name, md) in &self.doc.measures {
            let path = format!("measures.{name}");
            let Some(space) = self.space(&path, &md.space) else {
                continue;
            };
            match Measure::probability(space, md.weights.clone()) {
                Ok(m) => {
                    self.out.measures.insert(name.clone(), m);
                }
                Err(e) => self.violation(&path, e),
            }
        }
    }

    fn build_functions(&mut self) {
        for (name, fd) in &self.doc.test_functions {
            let path = format!("test_functions.{name}");
            let Some(space) = self.space(&path, &fd.space) else {
                continue;
            };
            match RealFunction::new(space, fd.values.clone()) {
                Ok(f) => {
                    self.out.functions.insert(name.clone(), f);
                }
                Err(e) => self.violation(&path, e),
            }
        }
    }

    fn build_sets(&mut self) {
        for (name, sd) in &self.doc.test_sets {
            let path = format!("test_sets.{name}");
            let Some(space) = self.space(&path, &sd.space) else {
                continue;
            };
            let role = match sd.role.as_str() {
                "open" => SetRole::Open,
                "closed" => SetRole::Closed,
                "continuity" => SetRole::Continuity,
                other => {
                    self.violation(&path, format!("unknown role {other:?}"));
                    continue;
                }
            };
            let members: Vec<&str> = sd.members.iter().map(String::as_str).collect();
            let boundary: Option<Vec<&str>> = sd
                .boundary
                .as_ref()
                .map(|b| b.iter().map(String::as_str).collect());
            match TestSet::from_ids(space, &members, role, boundary.as_deref()) {
                Ok(s) => {
                    self.out.sets.insert(name.clone(), s);
                }
                Err(e) => self.violation(&path, e),
            }
        }
    }

    fn build_bases(&mut self) {
        for (name, bd) in &self.doc.base_families {
            let path = format!("base_families.{name}");
            let Some(space) = self.space(&path, &bd.space) else {
                continue;
            };
            let mut per_limit = BTreeMap::new();
            let mut ok = true;
            for entry in &bd.entries {
                let Some(limit) = space.index_of(&entry.limit_point) else {
                    self.violation(
                        &path,
                        format!("unknown limit point {:?}", entry.limit_point),
                    );
                    ok = false;
                    continue;
                };
                let mut sets = Vec::new();
                for set_name in &entry.sets {
                    match self.out.sets.get(set_name) {
                        Some(s) => sets.push(s.clone()),
                        None => {
                            self.violation(
                                &path,
                                format!("unresolved reference to test set {set_name:?}"),
                            );
                            ok = false;
                        }
                    }
                }
                per_limit.insert(limit, sets);
            }
            if !ok {
                continue;
            }
            match BaseFamily::new(space, per_limit) {
                Ok(b) => {
                    self.out.bases.insert(name.clone(), b);
                }
                Err(e) => self.violation(&path, e),
            }
        }
    }

    fn check_config(&mut self) {
        let Some(config) = &self.doc.config else {
            return;
        };
        let Some(target) = &config.analysis else {
            return;
        };
        let path = "config.analysis";
        if let Some(f) = &target.family {
            if !self.out.families.contains_key(f) {
                self.violation(path, format!("unresolved reference to family kernel {f:?}"));
            }
        }
        if let Some(k) = &target.param_kernel {
            if !self.out.param_kernels.contains_key(k) {
                self.violation(path, format!("unresolved reference to param kernel {k:?}"));
            }
        }
        for (field, names) in [
            ("functions", &target.functions),
            ("lsc_functions", &target.lsc_functions),
        ] {
            if let Some(names) = names {
                for n in names {
                    if !self.out.functions.contains_key(n) {
                        self.violation(
                            format!("{path}.{field}"),
                            format!("unresolved reference to function {n:?}"),
                        );
                    }
                }
            }
        }
        for (field, names) in [
            ("open_sets", &target.open_sets),
            ("closed_sets", &target.closed_sets),
            ("continuity_sets", &target.continuity_sets),
        ] {
            if let Some(names) = names {
                for n in names {
                    if !self.out.sets.contains_key(n) {
                        self.violation(
                            format!("{path}.{field}"),
                            format!("unresolved reference to test set {n:?}"),
                        );
                    }
                }
            }
        }
        if let Some(seq) = &target.sequence {
            if !self.out.sequences.contains_key(seq) {
                self.violation(path, format!("unresolved reference to sequence {seq:?}"));
            }
        }
        if let Some(seq) = &target.s4_sequence {
            if !self.out.sequences.contains_key(seq) {
                self.violation(path, format!("unresolved reference to sequence {seq:?}"));
            }
        }
        if let Some(b) = &target.base_family {
            if !self.out.bases.contains_key(b) {
                self.violation(path, format!("unresolved reference to base family {b:?}"));
            }
        }
    }

    fn run(mut self) -> (ResolvedInstance, ValidationReport) {
        if self.doc.format_version != FORMAT_VERSION {
            self.violation(
                "format_version",
                format!(
                    "unsupported version {:?}, expected {FORMAT_VERSION:?}",
                    self.doc.format_version
                ),
            );
        }
        self.build_spaces();
        self.build_sequences();
        self.build_kernels();
        self.build_measures();
        self.build_functions();
        self.build_sets();
        self.build_bases();
        self.check_config();
        (self.out, self.report)
    }
}

/// Checks the whole document; the report lists every violation found.
pub fn validate(doc: &InstanceDocument) -> ValidationReport {
    let builder = Builder {
        doc,
        out: ResolvedInstance::default(),
        report: ValidationReport::default(),
    };
    builder.run().1
}

/// Validates and builds; fails with the full violation list.
pub fn resolve(doc: &InstanceDocument) -> Result<ResolvedInstance, ValidationReport> {
    let builder = Builder {
        doc,
        out: ResolvedInstance::default(),
        report: ValidationReport::default(),
    };
    let (out, report) = builder.run();
    if report.is_clean() {
        Ok(out)
    } else {
        Err(report)
    }
}

/// The family and witnesses a document asks to analyze.
pub struct AnalysisTarget {
    pub family: KernelFamily,
    pub witnesses: WitnessSet,
    pub epsilon: Option<f64>,
    pub window: Option<usize>,
}

/// Resolves the analysis target: an explicit family, or a param kernel
/// driven along a sequence. With no explicit config the document must
/// contain exactly one unambiguous choice.
pub fn analysis_target(
    doc: &InstanceDocument,
    resolved: &ResolvedInstance,
) -> crate::Result<AnalysisTarget> {
    let target = doc
        .config
        .as_ref()
        .and_then(|c| c.analysis.as_ref())
        .cloned()
        .unwrap_or_default();

    let family: KernelFamily = if let Some(name) = &target.family {
        resolved
            .families
            .get(name)
            .cloned()
            .ok_or_else(|| Error::InvalidValue(format!("family {name:?} not found")))?
    } else if let Some(kname) = &target.param_kernel {
        let kernel = resolved
            .param_kernels
            .get(kname)
            .ok_or_else(|| Error::InvalidValue(format!("param kernel {kname:?} not found")))?;
        let seq_name = target
            .sequence
            .as_ref()
            .ok_or_else(|| Error::InvalidValue("param kernel analysis needs a sequence".into()))?;
        let seq = resolved
            .sequences
            .get(seq_name)
            .ok_or_else(|| Error::InvalidValue(format!("sequence {seq_name:?} not found")))?;
        let s4_seq = match &target.s4_sequence {
            Some(n) => Some(
                resolved
                    .sequences
                    .get(n)
                    .ok_or_else(|| Error::InvalidValue(format!("sequence {n:?} not found")))?,
            ),
            None => None,
        };
        family_from_param(kernel, seq, s4_seq)?
    } else if resolved.families.len() == 1 && resolved.param_kernels.is_empty() {
        resolved.families.values().next().unwrap().clone()
    } else if resolved.families.is_empty() && resolved.param_kernels.len() == 1 {
        let kernel = resolved.param_kernels.values().next().unwrap();
        let candidates: Vec<&ConvergentSequence> = resolved
            .sequences
            .values()
            .filter(|s| FiniteMetricSpace::same(s.space(), kernel.param_space()))
            .collect();
        if candidates.len() != 1 {
            return Err(Error::InvalidValue(
                "cannot infer the driving sequence; set config.analysis".into(),
            ));
        }
        family_from_param(kernel, candidates[0], None)?
    } else {
        return Err(Error::InvalidValue(
            "document needs a kernel family or a param kernel plus sequence; set config.analysis"
                .into(),
        ));
    };

    let s1 = family.s1_space().clone();
    let on_s1 = |f: &RealFunction| -> bool { FiniteMetricSpace::same(f.space(), &s1) };
    let set_on_s1 = |s: &TestSet| -> bool { FiniteMetricSpace::same(s.space(), &s1) };

    let mut witnesses = WitnessSet::default();
    let pick_functions =
        |names: &Option<Vec<String>>, nonneg: bool| -> crate::Result<Vec<(String, RealFunction)>> {
            match names {
                Some(list) => list
                    .iter()
                    .map(|n| {
                        let f = resolved.functions.get(n).ok_or_else(|| {
                            Error::InvalidValue(format!("function {n:?} not found"))
                        })?;
                        Ok((n.clone(), f.clone()))
                    })
                    .collect(),
                None => Ok(resolved
                    .functions
                    .iter()
                    .filter(|(_, f)| on_s1(f) && (!nonneg || f.min_value() >= 0.0))
                    .map(|(n, f)| (n.clone(), f.clone()))
                    .collect()),
            }
        };
    witnesses.functions = pick_functions(&target.functions, false)?;
    witnesses.lsc_functions = pick_functions(&target.lsc_functions, true)?;

    let pick_sets =
        |names: &Option<Vec<String>>, role: SetRole| -> crate::Result<Vec<(String, TestSet)>> {
            match names {
                Some(list) => list
                    .iter()
                    .map(|n| {
                        let s = resolved.sets.get(n).ok_or_else(|| {
                            Error::InvalidValue(format!("test set {n:?} not found"))
                        })?;
                        Ok((n.clone(), s.clone()))
                    })
                    .collect(),
                None => Ok(resolved
                    .sets
                    .iter()
                    .filter(|(_, s)| set_on_s1(s) && s.role() == role)
                    .map(|(n, s)| (n.clone(), s.clone()))
                    .collect()),
            }
        };
    witnesses.open_sets = pick_sets(&target.open_sets, SetRole::Open)?;
    witnesses.closed_sets = pick_sets(&target.closed_sets, SetRole::Closed)?;
    witnesses.continuity_sets = pick_sets(&target.continuity_sets, SetRole::Continuity)?;

    // Empty categories fall back to generated defaults.
    let defaults = default_witnesses(&s1);
    if witnesses.functions.is_empty() {
        witnesses.functions = defaults.functions.clone();
    }
    if witnesses.lsc_functions.is_empty() {
        witnesses.lsc_functions = defaults.lsc_functions.clone();
    }
    if witnesses.open_sets.is_empty() {
        witnesses.open_sets = defaults.open_sets.clone();
    }
    if witnesses.closed_sets.is_empty() {
        witnesses.closed_sets = defaults.closed_sets.clone();
    }
    if witnesses.continuity_sets.is_empty() {
        witnesses.continuity_sets = defaults.continuity_sets;
    }

    if let Some(base_name) = &target.base_family {
        let base = resolved
            .bases
            .get(base_name)
            .ok_or_else(|| Error::InvalidValue(format!("base family {base_name:?} not found")))?;
        let provenance = family.provenance().ok_or(Error::NoProvenance)?;
        let limit = provenance.param_seq.limit();
        let sets = base.sets_for(limit).ok_or_else(|| {
            Error::InvalidBase(format!(
                "base {base_name:?} has no entry for limit point {:?}",
                provenance.param_seq.space().id(limit)
            ))
        })?;
        witnesses.base_sets = Some(sets.to_vec());
    }

    let (epsilon, window) = doc
        .config
        .as_ref()
        .map(|c| (c.epsilon, c.window))
        .unwrap_or((None, None));
    Ok(AnalysisTarget {
        family,
        witnesses,
        epsilon,
        window,
    })
}

fn space_doc(space: &SpaceRef) -> SpaceDoc {
    SpaceDoc {
        point_ids: space.point_ids().to_vec(),
        coords: space.coords().cloned(),
        metric: space.metric().clone(),
        metric_kind: if space.is_euclidean() {
            Some("euclidean".into())
        } else {
            None
        },
    }
}

fn sequence_doc(seq: &ConvergentSequence) -> SequenceDoc {
    let space = seq.space();
    SequenceDoc {
        space: String::new(), // caller fills the space name
        entries: seq
            .entries()
            .iter()
            .map(|&i| space.id(i).to_string())
            .collect(),
        limit: space.id(seq.limit()).to_string(),
    }
}

fn set_doc(set: &TestSet, space_name: &str) -> TestSetDoc {
    let space = set.space();
    TestSetDoc {
        space: space_name.to_string(),
        members: set
            .members()
            .iter()
            .map(|&i| space.id(i).to_string())
            .collect(),
        role: set.role().to_string(),
        boundary: if set.role() == SetRole::Continuity || !set.boundary().is_empty() {
            Some(
                set.boundary()
                    .iter()
                    .map(|&i| space.id(i).to_string())
                    .collect(),
            )
        } else {
            None
        },
    }
}

/// Serializes a generated instance as a self-contained, re-runnable
/// document: spaces, the kernel table, the driving sequence, and an
/// analysis config pointing at them.
pub fn instance_document(inst: &crate::harness::GeneratedInstance) -> InstanceDocument {
    let mut doc = InstanceDocument::default();
    doc.spaces.insert("s1".into(), space_doc(&inst.s1_space));
    doc.spaces.insert("s2".into(), space_doc(&inst.s2_space));
    doc.spaces
        .insert("param".into(), space_doc(&inst.param_space));
    let mut seq = sequence_doc(&inst.sequence);
    seq.space = "param".into();
    doc.sequences.insert("seq".into(), seq);
    let table: Vec<TableEntryDoc> = (0..inst.param_space.len())
        .map(|i| TableEntryDoc {
            s3: inst.param_space.id(i).to_string(),
            s4: None,
            mass: inst
                .kernel
                .at(i, None)
                .expect("table is total")
                .mass()
                .clone(),
        })
        .collect();
    doc.kernels.insert(
        "kernel".into(),
        KernelDoc::Param {
            s1_space: "s1".into(),
            s2_space: "s2".into(),
            param_space: "param".into(),
            s4_space: None,
            table,
        },
    );
    doc.config = Some(ConfigDoc {
        epsilon: None,
        window: None,
        analysis: Some(AnalysisTargetDoc {
            param_kernel: Some("kernel".into()),
            sequence: Some("seq".into()),
            ..AnalysisTargetDoc::default()
        }),
    });
    doc
}

/// Serializes the indicator fixture with its interval witnesses and both
/// bases (the avoiding base wired into the analysis config).
pub fn indicator_fixture_document(fixture: &crate::harness::IndicatorFixture) -> InstanceDocument {
    let mut doc = InstanceDocument::default();
    doc.spaces.insert("grid".into(), space_doc(&fixture.grid));
    doc.spaces
        .insert("obs".into(), space_doc(&fixture.s2_space));
    let mut seq = sequence_doc(&fixture.sequence);
    seq.space = "grid".into();
    doc.sequences.insert("seq".into(), seq);
    let table: Vec<TableEntryDoc> = (0..fixture.grid.len())
        .map(|i| TableEntryDoc {
            s3: fixture.grid.id(i).to_string(),
            s4: None,
            mass: fixture
                .kernel
                .at(i, None)
                .expect("table is total")
                .mass()
                .clone(),
        })
        .collect();
    doc.kernels.insert(
        "kernel".into(),
        KernelDoc::Param {
            s1_space: "grid".into(),
            s2_space: "obs".into(),
            param_space: "grid".into(),
            s4_space: None,
            table,
        },
    );

    let coord = RealFunction::coordinate(fixture.grid.clone(), 0).expect("grid has coordinates");
    doc.test_functions.insert(
        "coord0".into(),
        FunctionDoc {
            space: "grid".into(),
            values: coord.values().to_vec(),
        },
    );

    // interval sets in every role, plus the base sets by name
    let around = &fixture.avoiding_base[1];
    let away = &fixture.avoiding_base[2];
    let boundary_set = &fixture.boundary_base[1];
    doc.test_sets
        .insert("around_limit".into(), set_doc(around, "grid"));
    doc.test_sets
        .insert("away_from_limit".into(), set_doc(away, "grid"));
    doc.test_sets.insert(
        "around_limit_closed".into(),
        set_doc(&around.complement(SetRole::Closed), "grid"),
    );
    let cont = TestSet::new(
        fixture.grid.clone(),
        around.members().clone(),
        SetRole::Continuity,
        Some(std::collections::BTreeSet::new()),
    )
    .expect("continuity copy of the interval");
    doc.test_sets
        .insert("around_limit_cont".into(), set_doc(&cont, "grid"));
    doc.test_sets.insert(
        "whole".into(),
        set_doc(&TestSet::whole(fixture.grid.clone(), SetRole::Open), "grid"),
    );
    doc.test_sets
        .insert("limit_on_boundary".into(), set_doc(boundary_set, "grid"));

    let limit_id = fixture.grid.id(fixture.sequence.limit()).to_string();
    doc.base_families.insert(
        "avoiding".into(),
        BaseFamilyDoc {
            space: "grid".into(),
            entries: vec![BaseEntryDoc {
                limit_point: limit_id.clone(),
                sets: vec![
                    "whole".into(),
                    "around_limit".into(),
                    "away_from_limit".into(),
                ],
            }],
        },
    );
    doc.base_families.insert(
        "boundary".into(),
        BaseFamilyDoc {
            space: "grid".into(),
            entries: vec![BaseEntryDoc {
                limit_point: limit_id,
                sets: vec!["whole".into(), "limit_on_boundary".into()],
            }],
        },
    );

    // Lipschitz witnesses on the fixture decay like 1/n; a threshold of 0.1
    // reads that as vanishing at 20 steps while the full-TV series (fixed
    // at 1) still fails.
    doc.config = Some(ConfigDoc {
        epsilon: Some(0.1),
        window: None,
        analysis: Some(AnalysisTargetDoc {
            param_kernel: Some("kernel".into()),
            sequence: Some("seq".into()),
            functions: Some(vec!["coord0".into()]),
            lsc_functions: Some(vec!["coord0".into()]),
            open_sets: Some(vec![
                "around_limit".into(),
                "away_from_limit".into(),
                "whole".into(),
            ]),
            closed_sets: Some(vec!["around_limit_closed".into()]),
            continuity_sets: Some(vec!["around_limit_cont".into()]),
            base_family: Some("avoiding".into()),
            ..AnalysisTargetDoc::default()
        }),
    });
    doc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{gen_equivalence_instance, indicator_example_fixture, Amplitude};

    #[test]
    fn generated_document_round_trips_bit_for_bit() {
        let inst = gen_equivalence_instance(42, 3, 3, 8, Amplitude::FULL);
        let doc = instance_document(&inst);
        let json = doc.to_json();
        let back = parse(&json).unwrap();
        assert_eq!(doc, back);
        // and the re-serialization is byte-identical
        assert_eq!(json, back.to_json());
    }

    #[test]
    fn resolve_rebuilds_the_same_family() {
        let inst = gen_equivalence_instance(7, 3, 4, 6, Amplitude::new(1, 2));
        let doc = instance_document(&inst);
        let resolved = resolve(&doc).unwrap();
        let target = analysis_target(&doc, &resolved).unwrap();
        assert_eq!(target.family.len(), inst.family.len());
        for (a, b) in target.family.joints().iter().zip(inst.family.joints()) {
            assert_eq!(a.mass(), b.mass());
        }
        assert_eq!(target.family.limit().mass(), inst.family.limit().mass());
    }

    #[test]
    fn validation_names_violations_with_paths() {
        let mut doc = InstanceDocument::default();
        doc.spaces.insert(
            "bad".into(),
            SpaceDoc {
                point_ids: vec!["a".into(), "b".into(), "c".into()],
                coords: None,
                metric: vec![
                    vec![0.0, 1.0, 5.0],
                    vec![1.0, 0.0, 1.0],
                    vec![5.0, 1.0, 0.0],
                ],
                metric_kind: None,
            },
        );
        let report = validate(&doc);
        assert!(!report.is_clean());
        assert!(report
            .violations
            .iter()
            .any(|v| v.path == "spaces.bad" && v.message.contains("triangle")));
    }

    #[test]
    fn dangling_references_are_caught() {
        let mut doc = InstanceDocument::default();
        doc.sequences.insert(
            "seq".into(),
            SequenceDoc {
                space: "missing".into(),
                entries: vec!["x".into()],
                limit: "x".into(),
            },
        );
        let report = validate(&doc);
        assert!(report
            .violations
            .iter()
            .any(|v| v.message.contains("unresolved reference to space")));
    }

    #[test]
    fn fixture_document_is_valid_and_analyzable() {
        let fixture = indicator_example_fixture(6);
        let doc = indicator_fixture_document(&fixture);
        let report = validate(&doc);
        assert!(report.is_clean(), "{:?}", report.violations);
        let resolved = resolve(&doc).unwrap();
        let target = analysis_target(&doc, &resolved).unwrap();
        assert_eq!(target.family.len(), 6);
        assert!(target.witnesses.base_sets.is_some());
        assert_eq!(target.witnesses.open_sets.len(), 3);
    }

    #[test]
    fn target_is_inferred_when_the_document_is_unambiguous() {
        let inst = gen_equivalence_instance(19, 2, 2, 5, Amplitude::FULL);
        let mut doc = instance_document(&inst);
        doc.config = None; // one param kernel, one sequence on its space
        let resolved = resolve(&doc).unwrap();
        let target = analysis_target(&doc, &resolved).unwrap();
        assert_eq!(target.family.len(), 5);
        // witnesses fall back to generated defaults on the empty document
        assert!(!target.witnesses.functions.is_empty());
        assert!(!target.witnesses.open_sets.is_empty());

        // an empty document has nothing to analyze
        let empty = InstanceDocument::default();
        let resolved = resolve(&empty).unwrap();
        assert!(analysis_target(&empty, &resolved).is_err());
    }

    #[test]
    fn auxiliary_space_kernels_resolve_through_documents() {
        let s = |ids: &[&str], coords: &[f64]| SpaceDoc {
            point_ids: ids.iter().map(|s| s.to_string()).collect(),
            coords: Some(coords.iter().map(|&c| vec![c]).collect()),
            metric: coords
                .iter()
                .map(|a| coords.iter().map(|b| (a - b).abs()).collect())
                .collect(),
            metric_kind: Some("euclidean".into()),
        };
        let mut doc = InstanceDocument::default();
        doc.spaces.insert("s1".into(), s(&["x", "y"], &[0.0, 1.0]));
        doc.spaces.insert("s2".into(), s(&["u", "v"], &[0.0, 1.0]));
        doc.spaces.insert("p".into(), s(&["p0", "p1"], &[1.0, 0.0]));
        doc.spaces.insert("q".into(), s(&["q0", "q1"], &[1.0, 0.0]));
        let mut table = Vec::new();
        for p in ["p0", "p1"] {
            for q in ["q0", "q1"] {
                table.push(TableEntryDoc {
                    s3: p.into(),
                    s4: Some(q.into()),
                    mass: vec![vec![0.5, 0.0], vec![0.0, 0.5]],
                });
            }
        }
        doc.kernels.insert(
            "xi".into(),
            KernelDoc::Param {
                s1_space: "s1".into(),
                s2_space: "s2".into(),
                param_space: "p".into(),
                s4_space: Some("q".into()),
                table,
            },
        );
        doc.sequences.insert(
            "sp".into(),
            SequenceDoc {
                space: "p".into(),
                entries: vec!["p0".into(), "p1".into()],
                limit: "p1".into(),
            },
        );
        doc.sequences.insert(
            "sq".into(),
            SequenceDoc {
                space: "q".into(),
                entries: vec!["q0".into(), "q1".into()],
                limit: "q1".into(),
            },
        );
        doc.config = Some(ConfigDoc {
            epsilon: None,
            window: None,
            analysis: Some(AnalysisTargetDoc {
                param_kernel: Some("xi".into()),
                sequence: Some("sp".into()),
                s4_sequence: Some("sq".into()),
                ..AnalysisTargetDoc::default()
            }),
        });
        let report = validate(&doc);
        assert!(report.is_clean(), "{:?}", report.violations);
        let resolved = resolve(&doc).unwrap();
        let target = analysis_target(&doc, &resolved).unwrap();
        assert_eq!(target.family.len(), 2);
        // the table is constant, so the family is constant
        for j in target.family.joints() {
            assert_eq!(j, target.family.limit());
        }
    }

    #[test]
    fn param_kernel_tables_must_be_total_and_unique() {
        let inst = gen_equivalence_instance(3, 2, 2, 4, Amplitude::FULL);
        let mut doc = instance_document(&inst);
        let KernelDoc::Param { table, .. } = doc.kernels.get_mut("kernel").unwrap() else {
            panic!("generated kernels are param tables");
        };
        let dropped = table.pop().unwrap();
        let report = validate(&doc);
        assert!(report
            .violations
            .iter()
            .any(|v| v.message.contains("missing parameter points")));

        let KernelDoc::Param { table, .. } = doc.kernels.get_mut("kernel").unwrap() else {
            unreachable!()
        };
        table.push(dropped.clone());
        table.push(dropped);
        let report = validate(&doc);
        assert!(report
            .violations
            .iter()
            .any(|v| v.message.contains("duplicate table entry")));
    }

    #[test]
    fn non_monotone_sequence_warns_but_validates() {
        let mut doc = InstanceDocument::default();
        doc.spaces.insert(
            "line".into(),
            SpaceDoc {
                point_ids: vec!["a".into(), "b".into(), "c".into()],
                coords: Some(vec![vec![0.0], vec![0.5], vec![1.0]]),
                metric: vec![
                    vec![0.0, 0.5, 1.0],
                    vec![0.5, 0.0, 0.5],
                    vec![1.0, 0.5, 0.0],
                ],
                metric_kind: Some("euclidean".into()),
            },
        );
        doc.sequences.insert(
            "seq".into(),
            SequenceDoc {
                space: "line".into(),
                entries: vec!["b".into(), "c".into()],
                limit: "a".into(),
            },
        );
        let report = validate(&doc);
        assert!(report.is_clean());
        assert_eq!(report.warnings.len(), 1);
    }
}
