//! A trained classifier bundled with everything needed to go from raw column
//! values to predictions, plus its container encoding.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container::{Container, Metadata, ModelKind};
use crate::corpus::derive_seed;
use crate::error::{Error, Result};
use crate::features::paragraph::{ParagraphConfig, ParagraphVectorModel};
use crate::features::words::WordVectorTable;
use crate::matching::{predict_dictionary, predict_regex, DictionaryModel, RegexRuleSet};
use crate::nn::{decide, predict_proba_matrix, Dense, FeatureFamily, IsolatedModel, Mlp, SherlockModel};
use crate::pipeline::{assemble_features, Imputer, NUM_FEATURES};
use crate::trees::{DecisionTree, Node, NodeKind, RandomForest, TreeParams};
use crate::types::{Prediction, SemanticType};

#[derive(Debug, Clone)]
pub enum Classifier {
    Nn(SherlockModel),
    Isolated(IsolatedModel),
    Tree(DecisionTree),
    Forest(RandomForest),
    Dictionary { model: DictionaryModel, sample_size: usize },
    Regex { rules: RegexRuleSet, sample_size: usize },
}

impl Classifier {
    pub fn kind(&self) -> ModelKind {
        match self {
            Classifier::Nn(_) => ModelKind::Nn,
            Classifier::Isolated(_) => ModelKind::Isolated,
            Classifier::Tree(_) => ModelKind::Tree,
            Classifier::Forest(_) => ModelKind::Forest,
            Classifier::Dictionary { .. } => ModelKind::Dictionary,
            Classifier::Regex { .. } => ModelKind::Regex,
        }
    }

    pub fn uses_features(&self) -> bool {
        !matches!(self, Classifier::Dictionary { .. } | Classifier::Regex { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnPrediction {
    pub prediction: Prediction,
    /// Top class probability; matching models have none.
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Detector {
    pub classifier: Classifier,
    /// Present exactly when the classifier reads feature vectors.
    pub imputer: Option<Imputer>,
    pub paragraph: Option<ParagraphVectorModel>,
    pub seed: u64,
    pub hyperparameters: serde_json::Value,
}

impl Detector {
    pub fn feature_based(
        classifier: Classifier,
        imputer: Imputer,
        paragraph: ParagraphVectorModel,
        seed: u64,
        hyperparameters: serde_json::Value,
    ) -> Result<Self> {
        if !classifier.uses_features() {
            return Err(Error::InvalidArgument("matching models do not take feature vectors".into()));
        }
        if imputer.means.len() != NUM_FEATURES {
            return Err(Error::DimensionMismatch {
                expected: NUM_FEATURES,
                found: imputer.means.len(),
            });
        }
        Ok(Detector {
            classifier,
            imputer: Some(imputer),
            paragraph: Some(paragraph),
            seed,
            hyperparameters,
        })
    }

    pub fn matching(classifier: Classifier, seed: u64, hyperparameters: serde_json::Value) -> Result<Self> {
        if classifier.uses_features() {
            return Err(Error::InvalidArgument("feature-based models need an imputer and paragraph model".into()));
        }
        Ok(Detector {
            classifier,
            imputer: None,
            paragraph: None,
            seed,
            hyperparameters,
        })
    }

    fn feature_parts(&self) -> Result<(&Imputer, &ParagraphVectorModel)> {
        match (&self.imputer, &self.paragraph) {
            (Some(i), Some(p)) => Ok((i, p)),
            _ => Err(Error::InvalidArgument("this model does not use feature vectors".into())),
        }
    }

    /// Extracts and imputes feature vectors for the given columns.
    pub fn featurize(&self, columns: &[Vec<String>], words: &WordVectorTable) -> Result<Array2<f64>> {
        let (imputer, paragraph) = self.feature_parts()?;
        let rows: Vec<Vec<f64>> = columns
            .par_iter()
            .map(|values| {
                let mut v = assemble_features(values, words, paragraph)?;
                imputer.apply(&mut v)?;
                Ok(v)
            })
            .collect::<Result<_>>()?;
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Ok(Array2::from_shape_vec((columns.len(), NUM_FEATURES), flat).expect("rows have schema width"))
    }

    /// Class probabilities for imputed feature rows.
    pub fn probabilities(&self, x: ArrayView2<'_, f64>) -> Result<Vec<Vec<f64>>> {
        if x.ncols() != NUM_FEATURES {
            return Err(Error::DimensionMismatch {
                expected: NUM_FEATURES,
                found: x.ncols(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("feature matrix has non-finite values; impute first".into()));
        }
        let rows = |m: Array2<f64>| m.outer_iter().map(|r| r.to_vec()).collect();
        match &self.classifier {
            Classifier::Nn(m) => Ok(rows(predict_proba_matrix(m, x))),
            Classifier::Isolated(m) => Ok(rows(predict_proba_matrix(m, x))),
            Classifier::Tree(t) => x.outer_iter().map(|r| t.predict_proba(r.as_slice().expect("standard layout"))).collect(),
            Classifier::Forest(f) => x
                .outer_iter()
                .map(|r| f.predict_proba(&r.to_vec()))
                .collect(),
            _ => Err(Error::InvalidArgument("matching models have no class probabilities".into())),
        }
    }

    /// Predictions for imputed feature rows.
    pub fn predict_features(&self, x: ArrayView2<'_, f64>, reject_below: Option<f64>) -> Result<Vec<ColumnPrediction>> {
        let x = x.as_standard_layout();
        let probs = self.probabilities(x.view())?;
        probs
            .into_iter()
            .zip(x.outer_iter())
            .map(|(p, row)| {
                let confidence = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let prediction = match &self.classifier {
                    Classifier::Forest(f) => {
                        let class = f.predict_class(row.as_slice().expect("standard layout"))?;
                        match reject_below {
                            Some(t) if confidence < t => Prediction::Rejected,
                            _ => Prediction::Type(SemanticType::from_index(class).expect("class within vocabulary")),
                        }
                    }
                    _ => decide(&p, reject_below),
                };
                Ok(ColumnPrediction {
                    prediction,
                    confidence: Some(confidence),
                })
            })
            .collect()
    }

    /// End to end: raw column values to predictions. `words` is required for
    /// feature-based models and ignored by matching models.
    pub fn predict_columns(
        &self,
        columns: &[Vec<String>],
        words: Option<&WordVectorTable>,
        reject_below: Option<f64>,
    ) -> Result<Vec<ColumnPrediction>> {
        match &self.classifier {
            Classifier::Dictionary { model, sample_size } => Ok(self.vote(columns, |i, v| {
                predict_dictionary(model, v, *sample_size, derive_seed(self.seed, i as u64))
            })),
            Classifier::Regex { rules, sample_size } => Ok(self.vote(columns, |i, v| {
                predict_regex(rules, v, *sample_size, derive_seed(self.seed, i as u64))
            })),
            _ => {
                let words = words.ok_or_else(|| Error::InvalidArgument("this model needs a word-vector table".into()))?;
                let x = self.featurize(columns, words)?;
                self.predict_features(x.view(), reject_below)
            }
        }
    }

    fn vote(&self, columns: &[Vec<String>], f: impl Fn(usize, &[String]) -> Prediction + Sync) -> Vec<ColumnPrediction> {
        columns
            .par_iter()
            .enumerate()
            .map(|(i, v)| ColumnPrediction {
                prediction: f(i, v),
                confidence: None,
            })
            .collect()
    }

    pub fn to_container(&self) -> Container {
        let kind = self.classifier.kind();
        let mut c = Container::new(Metadata::new(kind, self.seed, self.hyperparameters.clone()));
        if let Some(imputer) = &self.imputer {
            c.put_floats("imputer.means", vec![imputer.means.len()], imputer.means.clone());
        }
        if let Some(p) = &self.paragraph {
            put_paragraph(&mut c, p);
        }
        match &self.classifier {
            Classifier::Nn(m) => {
                for (name, net) in m.subnets() {
                    put_mlp(&mut c, &format!("nn.{name}"), net);
                }
            }
            Classifier::Isolated(m) => {
                c.put_bytes("isolated.family", m.family.as_str().as_bytes().to_vec());
                put_mlp(&mut c, "isolated.net", &m.net);
            }
            Classifier::Tree(t) => put_tree(&mut c, "tree", t),
            Classifier::Forest(f) => {
                c.put_bytes("forest.params", serde_json::to_vec(&f.params).expect("params serialize"));
                for (i, t) in f.trees.iter().enumerate() {
                    put_tree(&mut c, &format!("forest.tree{i}"), t);
                }
            }
            Classifier::Dictionary { model, sample_size } => {
                c.put_bytes("dictionary", serde_json::to_vec(&model.to_json()).expect("dictionary serializes"));
                c.put_floats("sample_size", vec![1], vec![*sample_size as f64]);
            }
            Classifier::Regex { rules, sample_size } => {
                c.put_bytes("regex", rules.to_json_string().into_bytes());
                c.put_floats("sample_size", vec![1], vec![*sample_size as f64]);
            }
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let classifier = match c.metadata.kind {
            ModelKind::Nn => Classifier::Nn(SherlockModel {
                chars: get_mlp(c, "nn.chars")?,
                words: get_mlp(c, "nn.words")?,
                paragraph: get_mlp(c, "nn.paragraph")?,
                primary: get_mlp(c, "nn.primary")?,
            }),
            ModelKind::Isolated => {
                let family = std::str::from_utf8(c.bytes("isolated.family")?)
                    .map_err(|_| Error::Container("family name is not UTF-8".into()))?;
                Classifier::Isolated(IsolatedModel {
                    family: FeatureFamily::parse(family)?,
                    net: get_mlp(c, "isolated.net")?,
                })
            }
            ModelKind::Tree => Classifier::Tree(get_tree(c, "tree")?),
            ModelKind::Forest => {
                let params = serde_json::from_slice(c.bytes("forest.params")?)?;
                let mut trees = Vec::new();
                while c.sections.contains_key(&format!("forest.tree{}.header", trees.len())) {
                    trees.push(get_tree(c, &format!("forest.tree{}", trees.len()))?);
                }
                if trees.is_empty() {
                    return Err(Error::Container("forest has no trees".into()));
                }
                Classifier::Forest(RandomForest { trees, params })
            }
            ModelKind::Dictionary => Classifier::Dictionary {
                model: DictionaryModel::from_json(&serde_json::from_slice(c.bytes("dictionary")?)?)?,
                sample_size: get_sample_size(c)?,
            },
            ModelKind::Regex => Classifier::Regex {
                rules: RegexRuleSet::from_json_str(
                    std::str::from_utf8(c.bytes("regex")?).map_err(|_| Error::Container("rules are not UTF-8".into()))?,
                )?,
                sample_size: get_sample_size(c)?,
            },
            ModelKind::Paragraph => {
                return Err(Error::Container("container holds only a paragraph model".into()));
            }
        };
        let seed = c.metadata.seed;
        let hyper = c.metadata.hyperparameters.clone();
        if classifier.uses_features() {
            let (_, means) = c.floats("imputer.means")?;
            let imputer = Imputer { means: means.to_vec() };
            Detector::feature_based(classifier, imputer, get_paragraph(c)?, seed, hyper)
        } else {
            Detector::matching(classifier, seed, hyper)
        }
    }

    /// Saves the detector and returns the container size in bytes.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<u64> {
        self.to_container().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::load(path)?)
    }
}

pub fn paragraph_container(model: &ParagraphVectorModel) -> Container {
    let mut c = Container::new(Metadata::new(
        ModelKind::Paragraph,
        model.config.seed,
        serde_json::to_value(model.config).expect("config serializes"),
    ));
    put_paragraph(&mut c, model);
    c
}

pub fn save_paragraph_model(model: &ParagraphVectorModel, path: impl AsRef<Path>) -> Result<u64> {
    paragraph_container(model).save(path)
}

/// Loads the paragraph model from a paragraph-only or full detector container.
pub fn load_paragraph_model(path: impl AsRef<Path>) -> Result<ParagraphVectorModel> {
    get_paragraph(&Container::load(path)?)
}

#[derive(Serialize, Deserialize)]
struct ParagraphHeader {
    config: ParagraphConfig,
    vocab: Vec<String>,
    counts: Vec<u64>,
    epoch_losses: Vec<f64>,
}

// Training-column paragraph vectors are not stored: inference only needs
// the output weights.
fn put_paragraph(c: &mut Container, p: &ParagraphVectorModel) {
    let header = ParagraphHeader {
        config: p.config,
        vocab: p.vocab().to_vec(),
        counts: p.counts().to_vec(),
        epoch_losses: p.epoch_losses.clone(),
    };
    c.put_bytes("paragraph.header", serde_json::to_vec(&header).expect("header serializes"));
    c.put_floats(
        "paragraph.output",
        vec![p.vocab().len(), p.dimension()],
        p.output_weights().to_vec(),
    );
}

fn get_paragraph(c: &Container) -> Result<ParagraphVectorModel> {
    let header: ParagraphHeader = serde_json::from_slice(c.bytes("paragraph.header")?)?;
    let (_, output) = c.floats("paragraph.output")?;
    ParagraphVectorModel::from_parts(
        header.config,
        header.vocab,
        header.counts,
        output.to_vec(),
        Vec::new(),
        header.epoch_losses,
    )
}

fn put_mlp(c: &mut Container, prefix: &str, net: &Mlp) {
    for (i, layer) in net.layers.iter().enumerate() {
        let (rows, cols) = layer.weights.dim();
        c.put_floats(
            format!("{prefix}.layer{i}.weights"),
            vec![rows, cols],
            layer.weights.iter().cloned().collect(),
        );
        c.put_floats(format!("{prefix}.layer{i}.bias"), vec![cols], layer.bias.to_vec());
    }
}

fn get_mlp(c: &Container, prefix: &str) -> Result<Mlp> {
    let mut layers = Vec::new();
    loop {
        let name = format!("{prefix}.layer{}.weights", layers.len());
        if !c.sections.contains_key(&name) {
            break;
        }
        let (shape, w) = c.floats(&name)?;
        let (_, b) = c.floats(&format!("{prefix}.layer{}.bias", layers.len()))?;
        if shape.len() != 2 || b.len() != shape[1] {
            return Err(Error::Container(format!("{name} has an inconsistent shape")));
        }
        let weights = Array2::from_shape_vec((shape[0], shape[1]), w.to_vec())
            .map_err(|e| Error::Container(e.to_string()))?;
        layers.push(Dense {
            weights,
            bias: Array1::from(b.to_vec()),
        });
    }
    if layers.is_empty() {
        return Err(Error::Container(format!("missing network {prefix}")));
    }
    if layers.windows(2).any(|w| w[0].weights.ncols() != w[1].weights.nrows()) {
        return Err(Error::Container(format!("layers of {prefix} do not chain")));
    }
    Ok(Mlp { layers })
}

const NODE_WIDTH: usize = 6;

fn put_tree(c: &mut Container, prefix: &str, t: &DecisionTree) {
    let max_features = t.params.max_features.map_or(-1.0, |m| m as f64);
    c.put_floats(
        format!("{prefix}.header"),
        vec![5],
        vec![
            t.n_features as f64,
            t.n_classes as f64,
            t.params.max_depth as f64,
            max_features,
            t.params.min_samples_split as f64,
        ],
    );
    let mut nodes = Vec::with_capacity(t.nodes.len() * NODE_WIDTH);
    let mut leaves = Vec::new();
    for node in &t.nodes {
        let (feature, threshold, left, right) = match &node.kind {
            NodeKind::Split {
                feature,
                threshold,
                left,
                right,
            } => (*feature as f64, *threshold, *left as f64, *right as f64),
            NodeKind::Leaf { class_counts } => {
                leaves.extend_from_slice(class_counts);
                (-1.0, 0.0, 0.0, 0.0)
            }
        };
        nodes.extend_from_slice(&[feature, threshold, left, right, node.n_samples, node.impurity]);
    }
    c.put_floats(format!("{prefix}.nodes"), vec![t.nodes.len(), NODE_WIDTH], nodes);
    c.put_floats(format!("{prefix}.leaves"), vec![leaves.len() / t.n_classes, t.n_classes], leaves);
}

fn as_index(v: f64, what: &str) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::Container(format!("invalid {what} {v}")))
    }
}

fn get_tree(c: &Container, prefix: &str) -> Result<DecisionTree> {
    let (_, h) = c.floats(&format!("{prefix}.header"))?;
    if h.len() != 5 {
        return Err(Error::Container(format!("{prefix} header has the wrong length")));
    }
    let n_features = as_index(h[0], "feature count")?;
    let n_classes = as_index(h[1], "class count")?;
    let params = TreeParams {
        max_depth: as_index(h[2], "depth")?,
        max_features: if h[3] < 0.0 { None } else { Some(as_index(h[3], "feature count")?) },
        min_samples_split: as_index(h[4], "split size")?,
    };
    let (_, raw) = c.floats(&format!("{prefix}.nodes"))?;
    let (_, leaves) = c.floats(&format!("{prefix}.leaves"))?;
    let mut leaves = leaves.chunks_exact(n_classes.max(1));
    let n_nodes = raw.len() / NODE_WIDTH;
    let mut nodes = Vec::with_capacity(n_nodes);
    for r in raw.chunks_exact(NODE_WIDTH) {
        let kind = if r[0] < 0.0 {
            let counts = leaves
                .next()
                .ok_or_else(|| Error::Container(format!("{prefix} has fewer leaves than leaf nodes")))?;
            NodeKind::Leaf {
                class_counts: counts.to_vec(),
            }
        } else {
            let (feature, left, right) = (as_index(r[0], "feature")?, as_index(r[2], "child")?, as_index(r[3], "child")?);
            if feature >= n_features || left >= n_nodes || right >= n_nodes {
                return Err(Error::Container(format!("{prefix} has an out-of-range node")));
            }
            NodeKind::Split {
                feature,
                threshold: r[1],
                left,
                right,
            }
        };
        nodes.push(Node {
            n_samples: r[4],
            impurity: r[5],
            kind,
        });
    }
    if nodes.is_empty() {
        return Err(Error::Container(format!("{prefix} has no nodes")));
    }
    Ok(DecisionTree {
        nodes,
        n_features,
        n_classes,
        params,
    })
}

fn get_sample_size(c: &Container) -> Result<usize> {
    let (_, v) = c.floats("sample_size")?;
    v.first()
        .ok_or_else(|| Error::Container("empty sample size".into()))
        .and_then(|&s| as_index(s, "sample size"))
}
