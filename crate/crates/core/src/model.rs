//! Full model: parameters and the end-to-end forward pass.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{
    adjacency_weights, build_resolution_graph, multi_scale_embed, normalize_adjacency,
    EmbeddingParams, ResolutionSpec,
};
use crate::params::{normal_init, uniform_init, Bound, ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::temporal::{
    difference_attention, frequency_convolution, AttentionHead, DifferenceAttentionParams,
    FrequencyKernel,
};
use crate::tensor::{concat_rows, Tape, Tensor, Var};
use crate::transformer::{
    classifier_logits, cross_resolution_pool, fuse_views, graph_convolution,
    local_graph_attention, Activation, AlignParams, ClassProbabilities, ClassifierParams,
    EncoderLayerParams, GraphConvParams, LocalAttentionParams,
};

/// Stage bypasses used for ablation runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Ablation {
    /// Difference attention output replaced by its input.
    pub disable_da: bool,
    /// Frequency convolution output replaced by its input.
    pub disable_fcn: bool,
    /// Only the first kernel size is used.
    pub single_resolution: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub time_steps: usize,
    pub channels: usize,
    pub classes: usize,
    pub kernel_sizes: Vec<usize>,
    pub heads: usize,
    pub head_dim: usize,
    pub common_dim: usize,
    pub similarity_dim: usize,
    pub layers: usize,
    pub ablation: Ablation,
}

impl ModelConfig {
    /// Defaults for everything except the data dimensions.
    pub fn new(time_steps: usize, channels: usize, classes: usize) -> Self {
        Self {
            time_steps,
            channels,
            classes,
            kernel_sizes: vec![2, 4, 8],
            heads: 4,
            head_dim: 16,
            common_dim: 64,
            similarity_dim: 32,
            layers: 2,
            ablation: Ablation::default(),
        }
    }

    /// Kernel sizes actually instantiated, after the single-resolution ablation.
    pub fn active_kernel_sizes(&self) -> &[usize] {
        if self.ablation.single_resolution {
            &self.kernel_sizes[..1.min(self.kernel_sizes.len())]
        } else {
            &self.kernel_sizes
        }
    }

    pub fn validate(&self) -> Result<ResolutionSpec> {
        let dims = [
            ("time_steps", self.time_steps),
            ("channels", self.channels),
            ("heads", self.heads),
            ("head_dim", self.head_dim),
            ("common_dim", self.common_dim),
            ("similarity_dim", self.similarity_dim),
            ("layers", self.layers),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.classes < 2 {
            return Err(Error::Config("at least two classes are required".into()));
        }
        let spec = ResolutionSpec::new(self.active_kernel_sizes().to_vec())?;
        spec.embed_lengths(self.time_steps)?;
        Ok(spec)
    }
}

/// Parameter handles for one resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolutionParams {
    pub embed_len: usize,
    pub embedding: EmbeddingParams,
    pub adjacency_raw: ParamId,
    pub attention: DifferenceAttentionParams,
    pub frequency: FrequencyKernel,
    pub layers: Vec<EncoderLayerParams>,
    pub align: AlignParams,
}

/// Every learnable weight, grouped per resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct MedGnnParams<S> {
    config: ModelConfig,
    store: ParamStore<S>,
    resolutions: Vec<ResolutionParams>,
    classifier: ClassifierParams,
}

/// Intermediate values of one resolution, for inspection.
#[derive(Clone, Debug)]
pub struct ResolutionTrace<S> {
    pub node_features: Tensor<S>,
    pub fused: Tensor<S>,
    pub adjacency: Tensor<S>,
    pub output: Tensor<S>,
}

impl<S: Scalar> MedGnnParams<S> {
    /// Deterministic initialization: every draw comes from `rng`, in a fixed order.
    pub fn init<R: Rng>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        let spec = config.validate()?;
        let lengths = spec.embed_lengths(config.time_steps)?;
        let c = config.channels;
        let mut store = ParamStore::new();
        let mut resolutions = Vec::with_capacity(spec.len());

        for (m, (&k, &len)) in spec.kernel_sizes().iter().zip(&lengths).enumerate() {
            let p = |name: &str| format!("res{m}.{name}");
            let embedding = EmbeddingParams {
                kernel_size: k,
                kernels: store.add(p("embed.kernels"), uniform_init(rng, &[c, k], k)),
                bias: store.add(p("embed.bias"), Tensor::zeros(&[c])),
            };
            let adjacency_raw = store.add(p("adjacency_raw"), Tensor::zeros(&[c, c]));

            let d = config.head_dim;
            let heads = (0..config.heads)
                .map(|h| AttentionHead {
                    query: store.add(p(&format!("da.head{h}.query")), uniform_init(rng, &[c, d], c)),
                    key: store.add(p(&format!("da.head{h}.key")), uniform_init(rng, &[c, d], c)),
                    value: store.add(p(&format!("da.head{h}.value")), uniform_init(rng, &[c, d], c)),
                })
                .collect();
            let hd = config.heads * d;
            let attention = DifferenceAttentionParams {
                heads,
                head_dim: d,
                output: store.add(p("da.output"), uniform_init(rng, &[hd, c], hd)),
                output_bias: store.add(p("da.output_bias"), Tensor::zeros(&[c])),
            };

            let bins = len / 2 + 1;
            let mut kernel: Tensor<S> = normal_init(rng, &[c, bins, 2], 0.0, 0.01);
            for re in kernel.data_mut().iter_mut().step_by(2) {
                *re += S::one();
            }
            let frequency = FrequencyKernel {
                weights: store.add(p("fcn.kernel"), kernel),
            };

            let g = config.similarity_dim;
            let layers = (0..config.layers)
                .map(|l| EncoderLayerParams {
                    attention: LocalAttentionParams {
                        query: store.add(p(&format!("gt{l}.attn.query")), uniform_init(rng, &[len, g], len)),
                        query_bias: store.add(p(&format!("gt{l}.attn.query_bias")), Tensor::zeros(&[g])),
                        key: store.add(p(&format!("gt{l}.attn.key")), uniform_init(rng, &[len, g], len)),
                        key_bias: store.add(p(&format!("gt{l}.attn.key_bias")), Tensor::zeros(&[g])),
                        width: g,
                    },
                    conv: GraphConvParams {
                        weight: store.add(p(&format!("gt{l}.conv.weight")), uniform_init(rng, &[len, len], len)),
                        bias: store.add(p(&format!("gt{l}.conv.bias")), Tensor::zeros(&[len])),
                    },
                })
                .collect();

            let dc = config.common_dim;
            let align = AlignParams {
                weight: store.add(p("align.weight"), uniform_init(rng, &[len, dc], len)),
                bias: store.add(p("align.bias"), Tensor::zeros(&[dc])),
            };

            resolutions.push(ResolutionParams {
                embed_len: len,
                embedding,
                adjacency_raw,
                attention,
                frequency,
                layers,
                align,
            });
        }

        let flat = c * config.common_dim;
        let classifier = ClassifierParams {
            weight: store.add("classifier.weight", uniform_init(rng, &[flat, config.classes], flat)),
            bias: store.add("classifier.bias", Tensor::zeros(&[config.classes])),
        };

        Ok(Self {
            config,
            store,
            resolutions,
            classifier,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore<S> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<S> {
        &mut self.store
    }

    pub fn resolutions(&self) -> &[ResolutionParams] {
        &self.resolutions
    }

    pub fn classifier(&self) -> &ClassifierParams {
        &self.classifier
    }

    fn check_input(&self, x: &Tensor<S>) -> Result<()> {
        let want = [self.config.time_steps, self.config.channels];
        if x.shape() != want {
            return Err(Error::Config(format!(
                "sample shape {:?} does not match model input {want:?}",
                x.shape()
            )));
        }
        Ok(())
    }

    /// Logits `[1×K]` for one `[T×C]` sample recorded on `bound`'s tape.
    pub fn forward_logits<'t>(
        &self,
        bound: &Bound<'t, '_, S>,
        x: &Tensor<S>,
    ) -> Result<Var<'t, S>> {
        self.forward_inner(bound, x, None)
    }

    fn forward_inner<'t>(
        &self,
        bound: &Bound<'t, '_, S>,
        x: &Tensor<S>,
        mut trace: Option<&mut Vec<ResolutionTrace<S>>>,
    ) -> Result<Var<'t, S>> {
        self.check_input(x)?;
        let tape = bound.tape();
        let input = tape.constant(x.clone());
        let embeddings: Vec<EmbeddingParams> =
            self.resolutions.iter().map(|r| r.embedding).collect();
        let embedded = multi_scale_embed(input, &embeddings, bound)?;

        let mut outputs = Vec::with_capacity(self.resolutions.len());
        for (m, (res, z)) in self.resolutions.iter().zip(embedded).enumerate() {
            let stage = |name: &'static str| move |e: Error| e.in_stage(name, m);
            let graph = build_resolution_graph(z, bound.var(res.adjacency_raw), m)
                .map_err(stage("build_resolution_graph"))?;
            let nodes = graph.node_features;

            let x_da = if self.config.ablation.disable_da {
                nodes
            } else {
                difference_attention(nodes, &res.attention, bound)
                    .map_err(stage("difference_attention"))?
                    .da
            };
            let x_fc = if self.config.ablation.disable_fcn {
                nodes
            } else {
                frequency_convolution(nodes, bound.var(res.frequency.weights))
                    .map_err(stage("frequency_convolution"))?
            };
            let fused = fuse_views(x_da, x_fc).map_err(stage("fuse_views"))?;

            let weights = adjacency_weights(graph.adjacency_raw).map_err(stage("adjacency"))?;
            let norm = normalize_adjacency(graph.adjacency_raw).map_err(stage("adjacency"))?;
            let mut h = fused;
            for layer in &res.layers {
                let attended = local_graph_attention(h, weights, &layer.attention, bound)
                    .map_err(stage("local_graph_attention"))?
                    .attended;
                h = graph_convolution(
                    norm,
                    attended,
                    bound.var(layer.conv.weight),
                    Some(bound.var(layer.conv.bias)),
                    Activation::Relu,
                )
                .map_err(stage("graph_convolution"))?;
            }
            if let Some(t) = trace.as_deref_mut() {
                t.push(ResolutionTrace {
                    node_features: nodes.to_tensor(),
                    fused: fused.to_tensor(),
                    adjacency: weights.to_tensor(),
                    output: h.to_tensor(),
                });
            }
            outputs.push(h);
        }

        let aligns: Vec<AlignParams> = self.resolutions.iter().map(|r| r.align).collect();
        let pooled = cross_resolution_pool(&outputs, &aligns, bound)
            .map_err(|e| e.in_stage("cross_resolution_pool", 0))?;
        classifier_logits(pooled, &self.classifier, bound).map_err(|e| e.in_stage("classify", 0))
    }

    /// Class probabilities for one sample on a throwaway tape.
    pub fn predict(&self, x: &Tensor<S>) -> Result<ClassProbabilities<S>> {
        let tape = Tape::new();
        let bound = Bound::new(&tape, &self.store);
        let probs = self.forward_logits(&bound, x)?.softmax(1)?;
        let data = probs.to_tensor().into_data();
        ClassProbabilities::new(data)
    }

    /// Like [`MedGnnParams::predict`], also returning per-resolution intermediates.
    pub fn predict_traced(
        &self,
        x: &Tensor<S>,
    ) -> Result<(ClassProbabilities<S>, Vec<ResolutionTrace<S>>)> {
        let tape = Tape::new();
        let bound = Bound::new(&tape, &self.store);
        let mut trace = Vec::new();
        let probs = self.forward_inner(&bound, x, Some(&mut trace))?.softmax(1)?;
        let data = probs.to_tensor().into_data();
        Ok((ClassProbabilities::new(data)?, trace))
    }

    /// Mean cross-entropy over a batch, recorded on `bound`'s tape.
    pub fn batch_loss<'t>(
        &self,
        bound: &Bound<'t, '_, S>,
        inputs: &[&Tensor<S>],
        labels: &[usize],
    ) -> Result<Var<'t, S>> {
        let logits = inputs
            .iter()
            .map(|x| self.forward_logits(bound, x))
            .collect::<Result<Vec<_>>>()?;
        concat_rows(&logits)?.cross_entropy(labels)
    }

    /// Post-softmax adjacency `A` of every resolution.
    pub fn adjacency_matrices(&self) -> Result<Vec<Tensor<S>>> {
        let tape = Tape::new();
        self.resolutions
            .iter()
            .map(|r| {
                let raw = tape.constant(self.store.get(r.adjacency_raw).clone());
                Ok(adjacency_weights(raw)?.to_tensor())
            })
            .collect()
    }

    /// Adds `U(-scale, scale)` to every parameter entry. Zero-initialized
    /// biases otherwise leave ReLU inputs exactly at the kink, where finite
    /// differences are meaningless.
    pub fn jitter<R: Rng>(&mut self, rng: &mut R, scale: f64) {
        for t in self.store.tensors_mut() {
            for v in t.data_mut() {
                *v += S::cast(rng.random_range(-scale..scale));
            }
        }
    }

    /// Largest finite-difference relative error of the batch loss gradient
    /// over every parameter coordinate.
    pub fn gradient_check(&self, inputs: &[&Tensor<S>], labels: &[usize], step: S) -> Result<S> {
        let tape = Tape::new();
        let bound = Bound::new(&tape, &self.store);
        let loss = self.batch_loss(&bound, inputs, labels)?;
        let grads = bound.collect_grads(&tape.backward(loss)?);

        let mut probe = self.clone();
        let eval = |p: &Self| -> Result<S> {
            let tape = Tape::new();
            let bound = Bound::new(&tape, &p.store);
            let loss = p.batch_loss(&bound, inputs, labels)?;
            let v = loss.value().data()[0];
            Ok(v)
        };
        let two = S::cast(2.0);
        let mut worst = S::zero();
        let ids: Vec<ParamId> = self.store.ids().collect();
        for (id, grad) in ids.into_iter().zip(&grads) {
            for j in 0..grad.len() {
                let orig = probe.store.get(id).data()[j];
                probe.store.get_mut(id).data_mut()[j] = orig + step;
                let up = eval(&probe)?;
                probe.store.get_mut(id).data_mut()[j] = orig - step;
                let down = eval(&probe)?;
                probe.store.get_mut(id).data_mut()[j] = orig;
                let numeric = (up - down) / (two * step);
                worst = worst.max(crate::tensor::relative_error(grad[j], numeric));
            }
        }
        Ok(worst)
    }
}
