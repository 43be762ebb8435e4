use std::collections::VecDeque;

use super::{check_not_fired, cusum_update, Alarm, Detector, PostChangeGrid};
use crate::error::{Error, Result};
use crate::model::{IpidModel, LlrCoeffs};

/// Largest product grid evaluated exactly by default.
pub const DEFAULT_PRODUCT_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AllBatchOptions {
    /// Exact product enumeration is used while `|∏ Λ^(e)| ≤ product_cap`.
    pub product_cap: usize,
    /// Change-time window of the fallback; `None` means two periods.
    pub window: Option<usize>,
    /// Use the windowed statistic even when the product fits under the cap.
    pub force_windowed: bool,
}

impl Default for AllBatchOptions {
    fn default() -> Self {
        AllBatchOptions {
            product_cap: DEFAULT_PRODUCT_CAP,
            window: None,
            force_windowed: false,
        }
    }
}

/// One CUSUM per λ-vector of the product grid.
#[derive(Debug, Clone)]
struct ExactBank {
    num_batches: usize,
    /// Row-major `cells × batches` choice indices into `Λ^(e)`.
    choices: Vec<u32>,
    w: Vec<f64>,
}

impl ExactBank {
    fn new(grid: &PostChangeGrid) -> Self {
        let sizes: Vec<usize> = grid.per_batch().iter().map(Vec::len).collect();
        let num_batches = sizes.len();
        let cells = grid.product_size();
        let mut choices = Vec::with_capacity(cells * num_batches);
        let mut digits = vec![0usize; num_batches];
        for _ in 0..cells {
            choices.extend(digits.iter().map(|&d| d as u32));
            // last batch varies fastest
            for e in (0..num_batches).rev() {
                digits[e] += 1;
                if digits[e] < sizes[e] {
                    break;
                }
                digits[e] = 0;
            }
        }
        ExactBank {
            num_batches,
            choices,
            w: vec![0.0; cells],
        }
    }

    fn step(&mut self, batch: usize, ells: &[f64]) -> (f64, usize) {
        let e_count = self.num_batches;
        let mut best = (f64::NEG_INFINITY, 0);
        for (c, w) in self.w.iter_mut().enumerate() {
            let choice = self.choices[c * e_count + batch] as usize;
            *w = cusum_update(*w, ells[choice]);
            if *w > best.0 {
                best = (*w, c);
            }
        }
        best
    }

    fn lambda_of(&self, grid: &PostChangeGrid, cell: usize) -> Vec<f64> {
        let row = &self.choices[cell * self.num_batches..(cell + 1) * self.num_batches];
        row.iter()
            .enumerate()
            .map(|(e, &j)| grid.alternatives(e)[j as usize])
            .collect()
    }

    fn reset(&mut self) {
        self.w.fill(0.0);
    }
}

/// Per-batch GLR partial sums for one candidate change time.
#[derive(Debug, Clone)]
struct WindowEntry {
    /// `Σ_{i=start..n, b(i)=e} ℓ_i(λ)` for every `(e, λ)`, flattened.
    sums: Vec<f64>,
    /// `max_λ` of each batch's row.
    best: Vec<f64>,
    total: f64,
}

#[derive(Debug, Clone)]
struct WindowBank {
    window: usize,
    offsets: Vec<usize>,
    entries: VecDeque<WindowEntry>,
}

impl WindowBank {
    fn new(grid: &PostChangeGrid, window: usize) -> Self {
        let mut offsets = Vec::with_capacity(grid.per_batch().len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for l in grid.per_batch() {
            acc += l.len();
            offsets.push(acc);
        }
        WindowBank {
            window,
            offsets,
            entries: VecDeque::with_capacity(window),
        }
    }

    fn step(&mut self, batch: usize, ells: &[f64]) -> (f64, usize) {
        let num_batches = self.offsets.len() - 1;
        let mut fresh = if self.entries.len() == self.window {
            self.entries.pop_front().expect("window is nonempty")
        } else {
            WindowEntry {
                sums: vec![0.0; self.offsets[num_batches]],
                best: vec![0.0; num_batches],
                total: 0.0,
            }
        };
        fresh.sums.fill(0.0);
        fresh.best.fill(0.0);
        fresh.total = 0.0;
        self.entries.push_back(fresh);

        let (lo, hi) = (self.offsets[batch], self.offsets[batch + 1]);
        let mut best = (f64::NEG_INFINITY, 0);
        for (idx, entry) in self.entries.iter_mut().enumerate() {
            let row = &mut entry.sums[lo..hi];
            let mut row_max = f64::NEG_INFINITY;
            for (s, &ell) in row.iter_mut().zip(ells) {
                *s += ell;
                row_max = row_max.max(*s);
            }
            entry.best[batch] = row_max;
            entry.total = entry.best.iter().sum();
            if entry.total > best.0 {
                best = (entry.total, idx);
            }
        }
        best
    }

    fn lambda_of(&self, grid: &PostChangeGrid, entry: usize) -> Vec<f64> {
        let entry = &self.entries[entry];
        (0..self.offsets.len() - 1)
            .map(|e| {
                let row = &entry.sums[self.offsets[e]..self.offsets[e + 1]];
                let mut arg = 0;
                for (j, &s) in row.iter().enumerate() {
                    if s > row[arg] {
                        arg = j;
                    }
                }
                grid.alternatives(e)[arg]
            })
            .collect()
    }

    fn reset(&mut self) {
        self.entries.clear();
    }
}

#[derive(Debug, Clone)]
enum Bank {
    Exact(ExactBank),
    Windowed(WindowBank),
}

/// Detector for a change affecting every batch; fires at `τ_a`.
///
/// The exact mode keeps one CUSUM per λ-vector, so `W_n` is the joint
/// supremum over change time and all per-batch alternatives. When the
/// product grid is too large the windowed mode maximises, for each change
/// time in the last `window` samples, the separable per-batch suprema; it
/// never exceeds the exact statistic and equals it once the window covers
/// every change time.
#[derive(Debug, Clone)]
pub struct AllBatchDetector {
    model: IpidModel,
    grid: PostChangeGrid,
    threshold: f64,
    coeffs: Vec<Vec<LlrCoeffs>>,
    ells: Vec<f64>,
    bank: Bank,
    clock: u64,
    current: Option<(f64, usize)>,
    alarm: Option<Alarm>,
}

impl AllBatchDetector {
    pub fn new(model: IpidModel, grid: PostChangeGrid, threshold: f64) -> Result<Self> {
        Self::with_options(model, grid, threshold, AllBatchOptions::default())
    }

    pub fn with_options(
        model: IpidModel,
        grid: PostChangeGrid,
        threshold: f64,
        options: AllBatchOptions,
    ) -> Result<Self> {
        grid.validate(&model)?;
        let family = model.family();
        let coeffs = grid
            .per_batch()
            .iter()
            .enumerate()
            .map(|(e, lambdas)| {
                lambdas
                    .iter()
                    .map(|&l| family.llr_coeffs(model.theta(e), l))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let exact = !options.force_windowed && grid.product_size() <= options.product_cap;
        let bank = if exact {
            Bank::Exact(ExactBank::new(&grid))
        } else {
            let window = options.window.unwrap_or(2 * model.period());
            if window == 0 {
                return Err(Error::validation("window must be at least 1"));
            }
            Bank::Windowed(WindowBank::new(&grid, window))
        };
        let widest = grid.per_batch().iter().map(Vec::len).max().unwrap_or(0);
        Ok(AllBatchDetector {
            model,
            grid,
            threshold,
            coeffs,
            ells: vec![0.0; widest],
            bank,
            clock: 1,
            current: None,
            alarm: None,
        })
    }

    pub fn grid(&self) -> &PostChangeGrid {
        &self.grid
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.bank, Bank::Exact(_))
    }

    /// Change-time window of the windowed mode.
    pub fn window(&self) -> Option<usize> {
        match &self.bank {
            Bank::Exact(_) => None,
            Bank::Windowed(w) => Some(w.window),
        }
    }

    fn leader_lambda(&self, id: usize) -> Vec<f64> {
        match &self.bank {
            Bank::Exact(b) => b.lambda_of(&self.grid, id),
            Bank::Windowed(b) => b.lambda_of(&self.grid, id),
        }
    }
}

impl Detector for AllBatchDetector {
    fn model(&self) -> &IpidModel {
        &self.model
    }

    fn threshold(&self) -> f64 {
        self.threshold
    }

    fn set_threshold(&mut self, threshold: f64) {
        self.threshold = threshold;
    }

    fn clock(&self) -> u64 {
        self.clock
    }

    fn statistic(&self) -> f64 {
        self.current.map_or(0.0, |(w, _)| w)
    }

    fn alarm(&self) -> Option<&Alarm> {
        self.alarm.as_ref()
    }

    fn reset(&mut self, start_index: u64) {
        assert!(start_index >= 1, "sample indices are 1-based");
        match &mut self.bank {
            Bank::Exact(b) => b.reset(),
            Bank::Windowed(b) => b.reset(),
        }
        self.clock = start_index;
        self.current = None;
        self.alarm = None;
    }

    fn step(&mut self, y: f64) -> Result<Option<Alarm>> {
        check_not_fired(&self.alarm)?;
        self.model.family().check_obs(y)?;
        let k = self.clock;
        let batch = self.model.partition().batch_of(k);
        let coeffs = &self.coeffs[batch];
        let ells = &mut self.ells[..coeffs.len()];
        for (ell, c) in ells.iter_mut().zip(coeffs) {
            *ell = c.eval(y);
        }
        let leader = match &mut self.bank {
            Bank::Exact(b) => b.step(batch, ells),
            Bank::Windowed(b) => b.step(batch, ells),
        };
        self.clock += 1;
        self.current = Some(leader);
        if leader.0 > self.threshold {
            let alarm = Alarm {
                time: k,
                statistic: leader.0,
                batch: None,
                lambda: self.leader_lambda(leader.1),
            };
            self.alarm = Some(alarm.clone());
            return Ok(Some(alarm));
        }
        Ok(None)
    }
}
