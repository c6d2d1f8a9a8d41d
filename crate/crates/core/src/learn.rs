//! Decision trees over categorical attributes, grown greedily under a
//! Dirichlet-multinomial marginal likelihood score.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::Duration;

/// Log marginal likelihood of `counts` under a symmetric Dirichlet prior
/// with total concentration `alpha_total`:
///
/// `ln Γ(α)/Γ(α+n) + Σ_k ln Γ(α_k+n_k)/Γ(α_k)`, with `α_k = α/K`.
pub fn leaf_score(counts: &[u64], alpha_total: f64) -> Result<f64> {
    if !(alpha_total > 0.0) || !alpha_total.is_finite() {
        return Err(Error::InvalidInput(format!("alpha_total must be positive, got {alpha_total}")));
    }
    if counts.is_empty() {
        return Err(Error::InvalidInput("no classes".into()));
    }
    Ok(score_unchecked(counts, alpha_total))
}

fn score_unchecked(counts: &[u64], alpha_total: f64) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let alpha_k = alpha_total / counts.len() as f64;
    let mut s = ln_gamma(alpha_total) - ln_gamma(alpha_total + n as f64);
    for &c in counts.iter().filter(|&&c| c > 0) {
        s += ln_gamma(alpha_k + c as f64) - ln_gamma(alpha_k);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub values: Vec<String>,
}

impl Attribute {
    pub fn new(name: &str, values: &[&str]) -> Self {
        Attribute {
            name: name.to_string(),
            values: values.iter().map(|v| v.to_string()).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Row {
    pub attrs: Vec<usize>,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: Vec<Attribute>,
    pub classes: Vec<String>,
    pub rows: Vec<Row>,
}

impl Dataset {
    pub fn new(schema: Vec<Attribute>, classes: Vec<String>, rows: Vec<Row>) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::InvalidInput("target needs at least two classes".into()));
        }
        let ds = Dataset { schema, classes, rows };
        for r in &ds.rows {
            ds.check_row(&r.attrs)?;
            if r.class >= ds.classes.len() {
                return Err(Error::SchemaMismatch(format!("class index {}", r.class)));
            }
        }
        Ok(ds)
    }

    pub fn k(&self) -> usize {
        self.classes.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn check_row(&self, attrs: &[usize]) -> Result<()> {
        check_attrs(&self.schema, attrs)
    }

    pub fn class_counts(&self) -> Vec<u64> {
        let mut c = vec![0u64; self.k()];
        for r in &self.rows {
            c[r.class] += 1;
        }
        c
    }
}

fn check_attrs(schema: &[Attribute], attrs: &[usize]) -> Result<()> {
    if attrs.len() != schema.len() {
        return Err(Error::SchemaMismatch(format!(
            "{} values for {} attributes",
            attrs.len(),
            schema.len()
        )));
    }
    for (a, &v) in schema.iter().zip(attrs) {
        if v >= a.arity() {
            return Err(Error::SchemaMismatch(format!("{}={v}", a.name)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub alpha_total: f64,
    pub min_leaf: usize,
}

impl TreeParams {
    /// `alpha_total = K`, `min_leaf = 5`.
    pub fn for_classes(k: usize) -> Self {
        TreeParams { alpha_total: k as f64, min_leaf: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub counts: Vec<u64>,
    pub split: Option<Split>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub attr: usize,
    /// (attribute value, child node index); only values seen in training.
    pub children: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub schema: Vec<Attribute>,
    pub classes: Vec<String>,
    pub alpha_total: f64,
    pub nodes: Vec<Node>,
}

/// Grows a tree top-down. A node splits on the unused attribute whose children
/// have the highest summed score, provided that sum beats the node's own
/// score by more than [`SCORE_EPS`] and every child holds at least `min_leaf`
/// rows. Ties go to the attribute listed first in the schema.
pub fn learn_tree(data: &Dataset, params: TreeParams) -> Result<DecisionTree> {
    if data.is_empty() {
        return Err(Error::NoData);
    }
    if !(params.alpha_total > 0.0) {
        return Err(Error::InvalidInput("alpha_total must be positive".into()));
    }
    let mut tree = DecisionTree {
        schema: data.schema.clone(),
        classes: data.classes.clone(),
        alpha_total: params.alpha_total,
        nodes: Vec::new(),
    };
    let rows: Vec<usize> = (0..data.len()).collect();
    let mut used = vec![false; data.schema.len()];
    grow(&mut tree, data, &rows, &mut used, params);
    Ok(tree)
}

/// Score gains at or below this are treated as ties.
pub const SCORE_EPS: f64 = 1e-9;

/// Chosen split at a node: attribute index and child partitions.
pub fn best_split(
    data: &Dataset,
    rows: &[usize],
    used: &[bool],
    params: TreeParams,
) -> Option<(usize, Vec<(usize, Vec<usize>)>)> {
    let k = data.k();
    let parent = score_unchecked(&counts_of(data, rows), params.alpha_total);
    let mut best: Option<(f64, usize, Vec<(usize, Vec<usize>)>)> = None;
    for (attr, a) in data.schema.iter().enumerate() {
        if used[attr] {
            continue;
        }
        let mut parts: Vec<Vec<usize>> = vec![Vec::new(); a.arity()];
        for &r in rows {
            parts[data.rows[r].attrs[attr]].push(r);
        }
        let children: Vec<(usize, Vec<usize>)> =
            parts.into_iter().enumerate().filter(|(_, p)| !p.is_empty()).collect();
        if children.len() < 2 || children.iter().any(|(_, p)| p.len() < params.min_leaf) {
            continue;
        }
        let total: f64 = children
            .iter()
            .map(|(_, p)| {
                let mut c = vec![0u64; k];
                for &r in p {
                    c[data.rows[r].class] += 1;
                }
                score_unchecked(&c, params.alpha_total)
            })
            .sum();
        if total > parent + SCORE_EPS && best.as_ref().map_or(true, |(s, _, _)| total > *s + SCORE_EPS) {
            best = Some((total, attr, children));
        }
    }
    best.map(|(_, attr, children)| (attr, children))
}

fn counts_of(data: &Dataset, rows: &[usize]) -> Vec<u64> {
    let mut c = vec![0u64; data.k()];
    for &r in rows {
        c[data.rows[r].class] += 1;
    }
    c
}

fn grow(
    tree: &mut DecisionTree,
    data: &Dataset,
    rows: &[usize],
    used: &mut [bool],
    params: TreeParams,
) -> usize {
    let id = tree.nodes.len();
    tree.nodes.push(Node { counts: counts_of(data, rows), split: None });
    if let Some((attr, parts)) = best_split(data, rows, used, params) {
        used[attr] = true;
        let mut children = Vec::with_capacity(parts.len());
        for (value, part) in parts {
            children.push((value, grow(tree, data, &part, used, params)));
        }
        used[attr] = false;
        tree.nodes[id].split = Some(Split { attr, children });
    }
    id
}

impl DecisionTree {
    pub fn k(&self) -> usize {
        self.classes.len()
    }

    pub fn root_split(&self) -> Option<usize> {
        self.nodes.first().and_then(|n| n.split.as_ref()).map(|s| s.attr)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.split.is_none())
    }

    /// Sum of leaf scores.
    pub fn score(&self) -> f64 {
        self.leaves().map(|n| score_unchecked(&n.counts, self.alpha_total)).sum()
    }

    /// Counts at the deepest node reachable for `attrs`. A value never seen
    /// below a split stops at that split's node.
    pub fn route(&self, attrs: &[usize]) -> Result<&Node> {
        check_attrs(&self.schema, attrs)?;
        let mut node = &self.nodes[0];
        while let Some(split) = &node.split {
            match split.children.iter().find(|(v, _)| *v == attrs[split.attr]) {
                Some(&(_, child)) => node = &self.nodes[child],
                None => break,
            }
        }
        Ok(node)
    }

    /// `p_k = (n_k + α/K) / (n + α)` at the routed node.
    pub fn predict_distribution(&self, attrs: &[usize]) -> Result<Vec<f64>> {
        Ok(smoothed(&self.route(attrs)?.counts, self.alpha_total))
    }

    pub fn to_lines(&self) -> Vec<String> {
        let header = ModelHeader {
            schema: self.schema.clone(),
            classes: self.classes.clone(),
            alpha_total: self.alpha_total,
            nodes: self.nodes.len(),
        };
        std::iter::once(serde_json::to_string(&header).expect("header serializes"))
            .chain(self.nodes.iter().enumerate().map(|(id, n)| {
                serde_json::to_string(&NodeLine { id, counts: n.counts.clone(), split: n.split.clone() })
                    .expect("node serializes")
            }))
            .collect()
    }

    pub fn from_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut it = lines.into_iter().filter(|l| !l.trim().is_empty());
        let bad = |m: String| Error::InvalidInput(format!("model file: {m}"));
        let header: ModelHeader = serde_json::from_str(it.next().ok_or_else(|| bad("empty".into()))?)
            .map_err(|e| bad(e.to_string()))?;
        let mut nodes = Vec::with_capacity(header.nodes);
        for (i, l) in it.enumerate() {
            let n: NodeLine = serde_json::from_str(l).map_err(|e| bad(e.to_string()))?;
            if n.id != i || n.counts.len() != header.classes.len() {
                return Err(bad(format!("node line {i} malformed")));
            }
            nodes.push(Node { counts: n.counts, split: n.split });
        }
        if nodes.len() != header.nodes || nodes.is_empty() {
            return Err(bad("node count mismatch".into()));
        }
        for n in &nodes {
            if let Some(s) = &n.split {
                if s.attr >= header.schema.len()
                    || s.children.iter().any(|&(v, c)| c >= nodes.len() || v >= header.schema[s.attr].arity())
                {
                    return Err(bad("split references out of range".into()));
                }
            }
        }
        Ok(DecisionTree {
            schema: header.schema,
            classes: header.classes,
            alpha_total: header.alpha_total,
            nodes,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(p) = path.parent() {
            fs::create_dir_all(p)?;
        }
        let mut text = self.to_lines().join("\n");
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        DecisionTree::from_lines(text.lines())
    }
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    schema: Vec<Attribute>,
    classes: Vec<String>,
    alpha_total: f64,
    nodes: usize,
}

#[derive(Serialize, Deserialize)]
struct NodeLine {
    id: usize,
    counts: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
}

pub fn smoothed(counts: &[u64], alpha_total: f64) -> Vec<f64> {
    let n: u64 = counts.iter().sum();
    let alpha_k = alpha_total / counts.len() as f64;
    let denom = n as f64 + alpha_total;
    counts.iter().map(|&c| (c as f64 + alpha_k) / denom).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoldoutMetrics {
    pub n: usize,
    pub accuracy: f64,
    pub log_loss: f64,
}

pub fn evaluate_holdout(tree: &DecisionTree, holdout: &Dataset) -> Result<HoldoutMetrics> {
    if holdout.is_empty() {
        return Err(Error::InvalidInput("empty holdout set".into()));
    }
    if holdout.schema != tree.schema || holdout.classes != tree.classes {
        return Err(Error::SchemaMismatch("holdout schema differs from the tree's".into()));
    }
    let mut correct = 0usize;
    let mut loss = 0.0;
    for r in &holdout.rows {
        let p = tree.predict_distribution(&r.attrs)?;
        if argmax(&p) == r.class {
            correct += 1;
        }
        loss -= p[r.class].ln();
    }
    let n = holdout.len();
    Ok(HoldoutMetrics { n, accuracy: correct as f64 / n as f64, log_loss: loss / n as f64 })
}

/// Half-open duration bins `[0,e1), [e1,e2), …, [e_last, ∞)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DurationBinning {
    edges: Vec<Duration>,
}

impl DurationBinning {
    pub fn new(edges: Vec<Duration>) -> Result<Self> {
        if edges.is_empty() || edges[0] == Duration::ZERO {
            return Err(Error::InvalidConfig("bin edges must start above zero".into()));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("bin edges must strictly increase".into()));
        }
        Ok(DurationBinning { edges })
    }

    pub fn from_minutes(mins: &[u64]) -> Result<Self> {
        DurationBinning::new(mins.iter().map(|&m| Duration::from_mins(m)).collect())
    }

    pub fn edges(&self) -> &[Duration] {
        &self.edges
    }

    /// Finite bins plus the open one.
    pub fn n_bins(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn open_bin(&self) -> usize {
        self.edges.len()
    }

    pub fn bin(&self, wait: Duration) -> usize {
        self.edges.partition_point(|&e| e <= wait)
    }

    /// Lower and upper edge of bin `i`; the open bin has no upper edge.
    pub fn bounds(&self, i: usize) -> (Duration, Option<Duration>) {
        let lo = if i == 0 { Duration::ZERO } else { self.edges[i - 1] };
        (lo, self.edges.get(i).copied())
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.n_bins())
            .map(|i| match self.bounds(i) {
                (lo, Some(hi)) => format!("{}-{}m", lo.secs() / 60, hi.secs() / 60),
                (lo, None) => format!(">={}m", lo.secs() / 60),
            })
            .collect()
    }
}

impl Default for DurationBinning {
    /// 2, 5, 10, 15, 30, 60, 120, 240, 480 minutes.
    fn default() -> Self {
        DurationBinning::from_minutes(&[2, 5, 10, 15, 30, 60, 120, 240, 480]).expect("valid")
    }
}

pub fn bin_duration(wait: Duration, binning: &DurationBinning) -> usize {
    binning.bin(wait)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn closed_form_scores() {
        assert!(close(leaf_score(&[3, 1], 2.0).unwrap(), 0.05f64.ln()));
        assert!(close(leaf_score(&[2, 2], 2.0).unwrap(), (1.0f64 / 30.0).ln()));
        assert_eq!(leaf_score(&[0, 0], 2.0).unwrap(), 0.0);
        assert!(close(leaf_score(&[3, 1], 2.0).unwrap(), -2.995732273553991));
        assert!(leaf_score(&[1, 1], 0.0).is_err());
        assert!(leaf_score(&[1, 1], -1.0).is_err());
    }

    fn binary_schema(n: usize) -> Vec<Attribute> {
        (0..n).map(|i| Attribute::new(&format!("a{i}"), &["0", "1"])).collect()
    }

    fn classes2() -> Vec<String> {
        vec!["no".into(), "yes".into()]
    }

    #[test]
    fn perfect_separator_is_chosen() {
        let rows = (0..16)
            .map(|i| Row { attrs: vec![i % 2, (i / 2) % 2], class: (i / 2) % 2 })
            .collect();
        let ds = Dataset::new(binary_schema(2), classes2(), rows).unwrap();
        let tree = learn_tree(&ds, TreeParams { alpha_total: 2.0, min_leaf: 1 }).unwrap();
        assert_eq!(tree.root_split(), Some(1));
    }

    #[test]
    fn pure_node_does_not_split() {
        // parent score 0.2 beats the 2+2 split's 1/9
        let rows = (0..4).map(|i| Row { attrs: vec![i % 2], class: 0 }).collect();
        let ds = Dataset::new(binary_schema(1), classes2(), rows).unwrap();
        let tree = learn_tree(&ds, TreeParams { alpha_total: 2.0, min_leaf: 1 }).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert!(close(leaf_score(&[4, 0], 2.0).unwrap(), 0.2f64.ln()));
    }

    #[test]
    fn min_leaf_blocks_splits() {
        let rows = (0..4).map(|i| Row { attrs: vec![i % 2], class: i % 2 }).collect();
        let ds = Dataset::new(binary_schema(1), classes2(), rows).unwrap();
        let tree = learn_tree(&ds, TreeParams { alpha_total: 2.0, min_leaf: 5 }).unwrap();
        assert_eq!(tree.nodes.len(), 1);
    }

    #[test]
    fn smoothing_formula() {
        let p = smoothed(&[3, 1], 2.0);
        assert!(close(p[0], 4.0 / 6.0) && close(p[1], 2.0 / 6.0));
        assert_eq!(smoothed(&[0, 0], 2.0), vec![0.5, 0.5]);
        let p = smoothed(&[5, 4, 1], 3.0);
        assert!(close(p[0], 6.0 / 13.0) && close(p[1], 5.0 / 13.0) && close(p[2], 2.0 / 13.0));
    }

    #[test]
    fn predict_rejects_out_of_domain() {
        let ds = Dataset::new(binary_schema(1), classes2(), vec![Row { attrs: vec![0], class: 0 }])
            .unwrap();
        let tree = learn_tree(&ds, TreeParams::for_classes(2)).unwrap();
        assert!(matches!(tree.predict_distribution(&[2]), Err(Error::SchemaMismatch(_))));
        assert!(tree.predict_distribution(&[0, 0]).is_err());
    }

    #[test]
    fn unseen_value_stops_at_split() {
        let schema = vec![Attribute::new("c", &["a", "b", "c"])];
        let rows = (0..20).map(|i| Row { attrs: vec![i % 2], class: i % 2 }).collect();
        let ds = Dataset::new(schema, classes2(), rows).unwrap();
        let tree = learn_tree(&ds, TreeParams { alpha_total: 2.0, min_leaf: 5 }).unwrap();
        assert_eq!(tree.root_split(), Some(0));
        let p = tree.predict_distribution(&[2]).unwrap();
        assert!(close(p[0], 0.5));
    }

    #[test]
    fn holdout_metrics() {
        let ds = Dataset::new(
            binary_schema(1),
            classes2(),
            vec![Row { attrs: vec![0], class: 0 }; 3]
                .into_iter()
                .chain(std::iter::once(Row { attrs: vec![0], class: 1 }))
                .collect(),
        )
        .unwrap();
        let tree = learn_tree(&ds, TreeParams { alpha_total: 2.0, min_leaf: 5 }).unwrap();
        let one = Dataset::new(binary_schema(1), classes2(), vec![Row { attrs: vec![1], class: 0 }])
            .unwrap();
        let m = evaluate_holdout(&tree, &one).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert!((m.log_loss - 0.405465).abs() < 1e-6);
        let empty = Dataset::new(binary_schema(1), classes2(), vec![]).unwrap();
        assert!(evaluate_holdout(&tree, &empty).is_err());
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }

    #[test]
    fn binning() {
        let b = DurationBinning::default();
        assert_eq!(b.bin(Duration::from_mins(7)), 2);
        assert_eq!(b.bin(Duration::ZERO), 0);
        assert_eq!(b.bin(Duration::from_mins(600)), 9);
        assert_eq!(b.bin(Duration::from_mins(5)), 2);
        assert_eq!(b.bin(Duration::from_secs(299)), 1);
        assert!(DurationBinning::from_minutes(&[0, 5]).is_err());
        assert!(DurationBinning::from_minutes(&[5, 5]).is_err());
    }

    fn dataset_strategy() -> impl Strategy<Value = Dataset> {
        (1usize..5, 2usize..4).prop_flat_map(|(n_attr, k)| {
            prop::collection::vec(
                (prop::collection::vec(0usize..3, n_attr), 0..k),
                0..60,
            )
            .prop_map(move |rows| {
                let schema = (0..n_attr).map(|i| Attribute::new(&format!("a{i}"), &["x", "y", "z"])).collect();
                let classes = (0..k).map(|c| format!("c{c}")).collect();
                let rows = rows.into_iter().map(|(attrs, class)| Row { attrs, class }).collect();
                Dataset::new(schema, classes, rows).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn tree_invariants(ds in dataset_strategy(), min_leaf in 1usize..6) {
            prop_assume!(!ds.is_empty());
            let params = TreeParams { alpha_total: ds.k() as f64, min_leaf };
            let tree = learn_tree(&ds, params).unwrap();
            let single = leaf_score(&ds.class_counts(), params.alpha_total).unwrap();
            prop_assert!(tree.score() >= single - 1e-12);
            let routed: u64 = tree.leaves().map(|n| n.counts.iter().sum::<u64>()).sum();
            prop_assert_eq!(routed, ds.len() as u64);
            for r in &ds.rows {
                let p = tree.predict_distribution(&r.attrs).unwrap();
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
            }
            prop_assert_eq!(&learn_tree(&ds, params).unwrap(), &tree);
            let reloaded = DecisionTree::from_lines(tree.to_lines().iter().map(String::as_str)).unwrap();
            prop_assert_eq!(reloaded, tree);
        }
    }
}
