use super::PipelineError;

/// Splits `series` into `stride` interleaved sub-series; sub-series `i`
/// (0-based here) holds samples `i, i + stride, i + 2 stride, ...`.
pub fn multiplex_downsample(series: &[f64], stride: usize) -> Result<Vec<Vec<f64>>, PipelineError> {
    if stride == 0 {
        return Err(PipelineError::InvalidParams("stride must be >= 1".into()));
    }
    if series.len() < stride {
        return Err(PipelineError::TooShort {
            what: "multiplexer input",
            len: series.len(),
            need: stride,
        });
    }
    Ok((0..stride)
        .map(|i| series[i..].iter().step_by(stride).copied().collect())
        .collect())
}

/// How windows and targets are laid out relative to the sampled trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetLayout {
    /// Window length M.
    pub m: usize,
    /// Multiplexing stride.
    pub stride: usize,
    /// Reservoir samples recorded per input symbol.
    pub samples_per_symbol: usize,
}

impl Default for DatasetLayout {
    fn default() -> Self {
        Self {
            m: 200,
            stride: 20,
            samples_per_symbol: 1,
        }
    }
}

impl DatasetLayout {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.m == 0 || self.stride == 0 || self.samples_per_symbol == 0 {
            return Err(PipelineError::InvalidParams(
                "m, stride and samples_per_symbol must all be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Index into the input series of the target for window `k` of
    /// sub-series `i` (1-based): the symbol containing trace sample
    /// `(i - 1) + stride (k + m)`.
    pub fn target_index(&self, i: usize, k: usize) -> usize {
        ((i - 1) + self.stride * (k + self.m)) / self.samples_per_symbol
    }
}

/// Sliding windows over one sub-series with their prediction targets.
///
/// Windows are slices of `source`; pair `j` uses
/// `source[offsets[j] .. offsets[j] + m]` and predicts `targets[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub source: Vec<f64>,
    pub offsets: Vec<usize>,
    /// Window index `k` of each pair within its sub-series.
    pub ks: Vec<usize>,
    pub targets: Vec<f64>,
    pub m: usize,
    /// 1-based sub-series index.
    pub subseries_index: usize,
}

impl WindowedDataset {
    /// Dataset whose windows are given explicitly, stored back to back.
    pub fn from_windows(
        windows: &[Vec<f64>],
        targets: Vec<f64>,
        subseries_index: usize,
    ) -> Result<Self, PipelineError> {
        let m = windows.first().map_or(0, Vec::len);
        if m == 0 {
            return Err(PipelineError::Empty("dataset has no windows".into()));
        }
        if windows.len() != targets.len() {
            return Err(PipelineError::DimensionMismatch {
                expected: windows.len(),
                found: targets.len(),
            });
        }
        if let Some(w) = windows.iter().find(|w| w.len() != m) {
            return Err(PipelineError::DimensionMismatch {
                expected: m,
                found: w.len(),
            });
        }
        Ok(Self {
            source: windows.concat(),
            offsets: (0..windows.len()).map(|j| j * m).collect(),
            ks: (0..windows.len()).collect(),
            targets,
            m,
            subseries_index,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn window(&self, j: usize) -> &[f64] {
        &self.source[self.offsets[j]..self.offsets[j] + self.m]
    }

    pub fn windows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(|j| self.window(j))
    }

    fn subset(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            source: self.source.clone(),
            offsets: self.offsets[range.clone()].to_vec(),
            ks: self.ks[range.clone()].to_vec(),
            targets: self.targets[range].to_vec(),
            m: self.m,
            subseries_index: self.subseries_index,
        }
    }

    /// Chronological split: the first `floor(len · train_fraction)` pairs
    /// train, the rest test. Both parts must be nonempty.
    pub fn split(&self, train_fraction: f64) -> Result<(Self, Self), PipelineError> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(PipelineError::InvalidParams(format!(
                "train fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        let n_train = (self.len() as f64 * train_fraction + 1e-9).floor() as usize;
        if n_train == 0 || n_train >= self.len() {
            return Err(PipelineError::Empty(format!(
                "split of {} pairs at {train_fraction} leaves an empty part",
                self.len()
            )));
        }
        Ok((self.subset(0..n_train), self.subset(n_train..self.len())))
    }
}

/// Builds the windows of sub-series `subseries_index` (1-based) and their
/// targets read from `input`. Pairs whose target would fall past the end
/// of `input` are dropped.
pub fn build_dataset(
    sub_series: &[f64],
    input: &[f64],
    layout: &DatasetLayout,
    subseries_index: usize,
) -> Result<WindowedDataset, PipelineError> {
    layout.validate()?;
    if subseries_index == 0 || subseries_index > layout.stride {
        return Err(PipelineError::InvalidParams(format!(
            "sub-series index {subseries_index} outside 1..={}",
            layout.stride
        )));
    }
    if layout.m >= sub_series.len() {
        return Err(PipelineError::TooShort {
            what: "sub-series",
            len: sub_series.len(),
            need: layout.m + 1,
        });
    }
    let mut ks = Vec::new();
    let mut targets = Vec::new();
    for k in 0..sub_series.len() - layout.m {
        let idx = layout.target_index(subseries_index, k);
        if idx >= input.len() {
            break;
        }
        ks.push(k);
        targets.push(input[idx]);
    }
    if ks.is_empty() {
        return Err(PipelineError::Empty(format!(
            "sub-series {subseries_index} has no target inside the input"
        )));
    }
    Ok(WindowedDataset {
        source: sub_series.to_vec(),
        offsets: ks.clone(),
        ks,
        targets,
        m: layout.m,
        subseries_index,
    })
}
