use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::nn::spec::{Layout, NetworkSpec};
use crate::nn::weights::WeightSet;

/// Quantile-function evaluations from one forward pass: `values` is a
/// row-major `[taus.len() x action_count]` matrix of return estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileBatch {
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
    pub action_count: usize,
}

impl QuantileBatch {
    pub fn value(&self, tau_idx: usize, action: usize) -> f64 {
        self.values[tau_idx * self.action_count + action]
    }

    /// Per-action mean over the tau samples.
    pub fn action_means(&self) -> Vec<f64> {
        let a = self.action_count;
        let n = self.taus.len();
        let mut out = vec![0.0; a];
        for row in self.values.chunks_exact(a) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        for o in &mut out {
            *o /= n as f64;
        }
        out
    }
}

/// Cosine feature embedding of a sample quantile: entry `j` (1-based) is
/// `cos(pi * j * tau)`.
pub fn quantile_embedding(tau: f64, dims: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Contract(format!("tau {tau} outside [0, 1]")));
    }
    Ok((1..=dims).map(|j| (PI * j as f64 * tau).cos()).collect())
}

/// Recorded forward pass: every pre-activation and activation needed to run
/// the backward pass, with branch-per-tau layout for quantile heads.
#[derive(Debug, Default, Clone)]
pub struct Trace {
    valid: bool,
    branches: usize,
    input: Vec<f64>,
    taus: Vec<f64>,
    ego_z: Vec<f64>,
    ego_a: Vec<f64>,
    conv1_z: Vec<f64>,
    conv1_a: Vec<f64>,
    conv2_z: Vec<f64>,
    conv2_a: Vec<f64>,
    pool: Vec<f64>,
    pool_arg: Vec<usize>,
    concat: Vec<f64>,
    phi: Vec<f64>,
    emb_z: Vec<f64>,
    emb_a: Vec<f64>,
    merged: Vec<f64>,
    fc1_z: Vec<f64>,
    fc1_a: Vec<f64>,
    fc2_z: Vec<f64>,
    fc2_a: Vec<f64>,
    out: Vec<f64>,
}

impl Trace {
    pub fn outputs(&self) -> &[f64] {
        &self.out
    }

    pub fn branches(&self) -> usize {
        self.branches
    }

    /// ReLU sign pattern and max-pool argmax pattern, used by finite
    /// difference checks to detect kink crossings between evaluations.
    pub fn kink_signature(&self) -> (Vec<bool>, Vec<usize>) {
        let signs = self
            .ego_z
            .iter()
            .chain(&self.conv1_z)
            .chain(&self.conv2_z)
            .chain(&self.emb_z)
            .chain(&self.fc1_z)
            .chain(&self.fc2_z)
            .map(|&z| z > 0.0)
            .collect();
        (signs, self.pool_arg.clone())
    }

    /// Smallest |pre-activation| over all ReLU inputs of this pass.
    pub fn min_abs_preactivation(&self) -> f64 {
        self.ego_z
            .iter()
            .chain(&self.conv1_z)
            .chain(&self.conv2_z)
            .chain(&self.emb_z)
            .chain(&self.fc1_z)
            .chain(&self.fc2_z)
            .fold(f64::INFINITY, |m, &z| m.min(z.abs()))
    }

    fn ensure(&mut self, spec: &NetworkSpec, branches: usize) {
        let (e, c, f, j, d, a, v) = (
            spec.ego_input_width,
            spec.conv_filters,
            spec.fc_units,
            spec.concat_width(),
            spec.embedding_dims,
            spec.action_count,
            spec.max_vehicles,
        );
        self.branches = branches;
        self.input.resize(e + v * spec.per_vehicle_width, 0.0);
        self.taus.resize(branches, 0.0);
        self.ego_z.resize(f, 0.0);
        self.ego_a.resize(f, 0.0);
        self.conv1_z.resize(v * c, 0.0);
        self.conv1_a.resize(v * c, 0.0);
        self.conv2_z.resize(v * c, 0.0);
        self.conv2_a.resize(v * c, 0.0);
        self.pool.resize(c, 0.0);
        self.pool_arg.resize(c, 0);
        self.concat.resize(j, 0.0);
        let emb = if spec.has_quantile_head { branches } else { 0 };
        self.phi.resize(emb * d, 0.0);
        self.emb_z.resize(emb * j, 0.0);
        self.emb_a.resize(emb * j, 0.0);
        self.merged.resize(branches * j, 0.0);
        self.fc1_z.resize(branches * f, 0.0);
        self.fc1_a.resize(branches * f, 0.0);
        self.fc2_z.resize(branches * f, 0.0);
        self.fc2_a.resize(branches * f, 0.0);
        self.out.resize(branches * a, 0.0);
    }
}

#[inline]
fn dense(out_z: &mut [f64], w: &[f32], b: &[f32], x: &[f64]) {
    let n_in = x.len();
    for (o, (wrow, bias)) in out_z.iter_mut().zip(w.chunks_exact(n_in).zip(b)) {
        let mut acc = 0.0f64;
        for (wi, xi) in wrow.iter().zip(x) {
            acc += *wi as f64 * *xi;
        }
        *o = acc + *bias as f64;
    }
}

#[inline]
fn relu(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d = s.max(0.0);
    }
}

/// Fixed-architecture network: validated spec plus the parameter layout.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    layout: Layout,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Network> {
        spec.validate()?;
        let layout = spec.layout();
        Ok(Network { spec, layout })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Action-value forward pass for specs without a quantile head.
    pub fn forward(&self, w: &WeightSet, x: &[f32]) -> Result<Vec<f64>> {
        let mut trace = Trace::default();
        self.forward_into(w, x, None, &mut trace)?;
        Ok(trace.out.clone())
    }

    /// Quantile forward pass; one output row per tau.
    pub fn forward_quantiles(
        &self,
        w: &WeightSet,
        x: &[f32],
        taus: &[f64],
    ) -> Result<QuantileBatch> {
        let mut trace = Trace::default();
        self.forward_into(w, x, Some(taus), &mut trace)?;
        Ok(QuantileBatch {
            taus: taus.to_vec(),
            values: trace.out.clone(),
            action_count: self.spec.action_count,
        })
    }

    /// Forward pass recording into a reusable trace. `taus` must be present
    /// exactly when the spec has a quantile head.
    pub fn forward_into(
        &self,
        w: &WeightSet,
        x: &[f32],
        taus: Option<&[f64]>,
        trace: &mut Trace,
    ) -> Result<()> {
        let spec = &self.spec;
        let l = &self.layout;
        if x.len() != spec.input_width() {
            return Err(Error::shape(format!(
                "input width {} != spec width {}",
                x.len(),
                spec.input_width()
            )));
        }
        if w.len() != l.total {
            return Err(Error::shape("weight count mismatch"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        match (spec.has_quantile_head, taus) {
            (true, Some(t)) if !t.is_empty() => {
                if let Some(bad) = t.iter().find(|t| !(0.0..=1.0).contains(*t)) {
                    return Err(Error::Contract(format!("tau {bad} outside [0, 1]")));
                }
            }
            (false, None) => {}
            (true, _) => return Err(Error::shape("quantile head requires non-empty taus")),
            (false, Some(_)) => return Err(Error::shape("taus passed to non-quantile net")),
        }

        let branches = taus.map_or(1, <[f64]>::len);
        trace.ensure(spec, branches);
        trace.valid = false;
        for (d, s) in trace.input.iter_mut().zip(x) {
            *d = *s as f64;
        }
        if let Some(t) = taus {
            trace.taus.copy_from_slice(t);
        }

        let (e, p, v, c, f, j, d, a) = (
            spec.ego_input_width,
            spec.per_vehicle_width,
            spec.max_vehicles,
            spec.conv_filters,
            spec.fc_units,
            spec.concat_width(),
            spec.embedding_dims,
            spec.action_count,
        );
        let wt = w.as_slice();

        // Ego dense layer.
        dense(
            &mut trace.ego_z,
            &wt[l.ego_w..l.ego_w + f * e],
            &wt[l.ego_b..l.ego_b + f],
            &trace.input[..e],
        );
        relu(&mut trace.ego_a, &trace.ego_z);

        // Conv stack over vehicle blocks (kernel = stride = block width).
        let w1 = &wt[l.conv1_w..l.conv1_w + c * p];
        let b1 = &wt[l.conv1_b..l.conv1_b + c];
        for vi in 0..v {
            let xin = &trace.input[e + vi * p..e + (vi + 1) * p];
            dense(&mut trace.conv1_z[vi * c..(vi + 1) * c], w1, b1, xin);
        }
        relu(&mut trace.conv1_a, &trace.conv1_z);
        let w2 = &wt[l.conv2_w..l.conv2_w + c * c];
        let b2 = &wt[l.conv2_b..l.conv2_b + c];
        let (conv1_a, conv2_z) = (&trace.conv1_a, &mut trace.conv2_z);
        for vi in 0..v {
            dense(
                &mut conv2_z[vi * c..(vi + 1) * c],
                w2,
                b2,
                &conv1_a[vi * c..(vi + 1) * c],
            );
        }
        relu(&mut trace.conv2_a, &trace.conv2_z);

        // Max-pool over the vehicle axis.
        for ci in 0..c {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0usize;
            for vi in 0..v {
                let val = trace.conv2_a[vi * c + ci];
                if val > best {
                    best = val;
                    arg = vi;
                }
            }
            trace.pool[ci] = best;
            trace.pool_arg[ci] = arg;
        }

        trace.concat[..f].copy_from_slice(&trace.ego_a);
        trace.concat[f..].copy_from_slice(&trace.pool);

        // Per-branch layers.
        for b in 0..branches {
            if spec.has_quantile_head {
                let tau = trace.taus[b];
                let phi = &mut trace.phi[b * d..(b + 1) * d];
                for (idx, ph) in phi.iter_mut().enumerate() {
                    *ph = (PI * (idx + 1) as f64 * tau).cos();
                }
                let we = &wt[l.emb_w..l.emb_w + j * d];
                let be = &wt[l.emb_b..l.emb_b + j];
                let (ez, ea) = (
                    &mut trace.emb_z[b * j..(b + 1) * j],
                    &mut trace.emb_a[b * j..(b + 1) * j],
                );
                dense(ez, we, be, &trace.phi[b * d..(b + 1) * d]);
                relu(ea, ez);
                for ((m, cc), e_a) in trace.merged[b * j..(b + 1) * j]
                    .iter_mut()
                    .zip(&trace.concat)
                    .zip(ea.iter())
                {
                    *m = cc * e_a;
                }
            } else {
                trace.merged[b * j..(b + 1) * j].copy_from_slice(&trace.concat);
            }

            dense(
                &mut trace.fc1_z[b * f..(b + 1) * f],
                &wt[l.fc1_w..l.fc1_w + f * j],
                &wt[l.fc1_b..l.fc1_b + f],
                &trace.merged[b * j..(b + 1) * j],
            );
            relu(
                &mut trace.fc1_a[b * f..(b + 1) * f],
                &trace.fc1_z[b * f..(b + 1) * f],
            );
            dense(
                &mut trace.fc2_z[b * f..(b + 1) * f],
                &wt[l.fc2_w..l.fc2_w + f * f],
                &wt[l.fc2_b..l.fc2_b + f],
                &trace.fc1_a[b * f..(b + 1) * f],
            );
            relu(
                &mut trace.fc2_a[b * f..(b + 1) * f],
                &trace.fc2_z[b * f..(b + 1) * f],
            );

            let h = &trace.fc2_a[b * f..(b + 1) * f];
            let out = &mut trace.out[b * a..(b + 1) * a];
            if spec.dueling {
                let wv = &wt[l.val_w..l.val_w + f];
                let mut val = wt[l.val_b] as f64;
                for (wi, hi) in wv.iter().zip(h) {
                    val += *wi as f64 * *hi;
                }
                let wa = &wt[l.adv_w..l.adv_w + a * f];
                let ba = &wt[l.adv_b..l.adv_b + a];
                let mut mean_adv = 0.0;
                for (ai, (wrow, bias)) in out.iter_mut().zip(wa.chunks_exact(f).zip(ba)) {
                    let mut acc = 0.0;
                    for (wi, hi) in wrow.iter().zip(h) {
                        acc += *wi as f64 * *hi;
                    }
                    *ai = acc + *bias as f64;
                    mean_adv += *ai;
                }
                mean_adv /= a as f64;
                for ai in out.iter_mut() {
                    *ai = val + *ai - mean_adv;
                }
            } else {
                let mut z = vec![0.0; a];
                dense(
                    &mut z,
                    &wt[l.adv_w..l.adv_w + a * f],
                    &wt[l.adv_b..l.adv_b + a],
                    h,
                );
                out.copy_from_slice(&z);
            }
        }
        trace.valid = true;
        Ok(())
    }

    /// Accumulates d(loss)/d(weights) into `grads` for the recorded forward
    /// pass, given d(loss)/d(output) as a `[branches x action_count]` matrix.
    pub fn backward(
        &self,
        w: &WeightSet,
        trace: &Trace,
        d_out: &[f64],
        grads: &mut [f64],
    ) -> Result<()> {
        if !trace.valid {
            return Err(Error::Contract(
                "backward without a recorded forward pass".into(),
            ));
        }
        let spec = &self.spec;
        let l = &self.layout;
        let (e, p, _v, c, f, j, d, a) = (
            spec.ego_input_width,
            spec.per_vehicle_width,
            spec.max_vehicles,
            spec.conv_filters,
            spec.fc_units,
            spec.concat_width(),
            spec.embedding_dims,
            spec.action_count,
        );
        if d_out.len() != trace.branches * a {
            return Err(Error::shape("output gradient shape"));
        }
        if grads.len() != l.total {
            return Err(Error::shape("gradient buffer shape"));
        }
        let wt = w.as_slice();

        let mut d_concat = vec![0.0f64; j];
        let mut d_h = vec![0.0f64; f];
        let mut d_fc1 = vec![0.0f64; f];
        let mut d_merged = vec![0.0f64; j];

        for b in 0..trace.branches {
            let dout_b = &d_out[b * a..(b + 1) * a];
            let h = &trace.fc2_a[b * f..(b + 1) * f];

            // Head backward -> d_h.
            d_h.iter_mut().for_each(|x| *x = 0.0);
            if spec.dueling {
                let sum_d: f64 = dout_b.iter().sum();
                // Value head.
                for (g, hi) in grads[l.val_w..l.val_w + f].iter_mut().zip(h) {
                    *g += sum_d * hi;
                }
                grads[l.val_b] += sum_d;
                let wv = &wt[l.val_w..l.val_w + f];
                for (dh, wi) in d_h.iter_mut().zip(wv) {
                    *dh += sum_d * *wi as f64;
                }
                // Advantage head with mean subtraction.
                let wa = &wt[l.adv_w..l.adv_w + a * f];
                for (ai, &g_out) in dout_b.iter().enumerate() {
                    let d_adv = g_out - sum_d / a as f64;
                    for (g, hi) in grads[l.adv_w + ai * f..l.adv_w + (ai + 1) * f]
                        .iter_mut()
                        .zip(h)
                    {
                        *g += d_adv * hi;
                    }
                    grads[l.adv_b + ai] += d_adv;
                    for (dh, wi) in d_h.iter_mut().zip(&wa[ai * f..(ai + 1) * f]) {
                        *dh += d_adv * *wi as f64;
                    }
                }
            } else {
                let wa = &wt[l.adv_w..l.adv_w + a * f];
                for (ai, &g_out) in dout_b.iter().enumerate() {
                    for (g, hi) in grads[l.adv_w + ai * f..l.adv_w + (ai + 1) * f]
                        .iter_mut()
                        .zip(h)
                    {
                        *g += g_out * hi;
                    }
                    grads[l.adv_b + ai] += g_out;
                    for (dh, wi) in d_h.iter_mut().zip(&wa[ai * f..(ai + 1) * f]) {
                        *dh += g_out * *wi as f64;
                    }
                }
            }

            // fc2 backward.
            let fc2_z = &trace.fc2_z[b * f..(b + 1) * f];
            let fc1_a = &trace.fc1_a[b * f..(b + 1) * f];
            d_fc1.iter_mut().for_each(|x| *x = 0.0);
            for fi in 0..f {
                if fc2_z[fi] <= 0.0 {
                    continue;
                }
                let dz = d_h[fi];
                for (g, xi) in grads[l.fc2_w + fi * f..l.fc2_w + (fi + 1) * f]
                    .iter_mut()
                    .zip(fc1_a)
                {
                    *g += dz * xi;
                }
                grads[l.fc2_b + fi] += dz;
                for (dd, wi) in d_fc1.iter_mut().zip(&wt[l.fc2_w + fi * f..l.fc2_w + (fi + 1) * f])
                {
                    *dd += dz * *wi as f64;
                }
            }

            // fc1 backward.
            let fc1_z = &trace.fc1_z[b * f..(b + 1) * f];
            let merged = &trace.merged[b * j..(b + 1) * j];
            d_merged.iter_mut().for_each(|x| *x = 0.0);
            for fi in 0..f {
                if fc1_z[fi] <= 0.0 {
                    continue;
                }
                let dz = d_fc1[fi];
                for (g, xi) in grads[l.fc1_w + fi * j..l.fc1_w + (fi + 1) * j]
                    .iter_mut()
                    .zip(merged)
                {
                    *g += dz * xi;
                }
                grads[l.fc1_b + fi] += dz;
                for (dd, wi) in d_merged
                    .iter_mut()
                    .zip(&wt[l.fc1_w + fi * j..l.fc1_w + (fi + 1) * j])
                {
                    *dd += dz * *wi as f64;
                }
            }

            // Merge backward.
            if spec.has_quantile_head {
                let emb_a = &trace.emb_a[b * j..(b + 1) * j];
                let emb_z = &trace.emb_z[b * j..(b + 1) * j];
                let phi = &trace.phi[b * d..(b + 1) * d];
                for ji in 0..j {
                    d_concat[ji] += d_merged[ji] * emb_a[ji];
                    if emb_z[ji] <= 0.0 {
                        continue;
                    }
                    let dz = d_merged[ji] * trace.concat[ji];
                    for (g, ph) in grads[l.emb_w + ji * d..l.emb_w + (ji + 1) * d]
                        .iter_mut()
                        .zip(phi)
                    {
                        *g += dz * ph;
                    }
                    grads[l.emb_b + ji] += dz;
                }
            } else {
                for (dc, dm) in d_concat.iter_mut().zip(&d_merged) {
                    *dc += dm;
                }
            }
        }

        // Trunk backward (once; branch gradients were accumulated above).
        // Ego dense layer.
        for fi in 0..f {
            if trace.ego_z[fi] <= 0.0 {
                continue;
            }
            let dz = d_concat[fi];
            for (g, xi) in grads[l.ego_w + fi * e..l.ego_w + (fi + 1) * e]
                .iter_mut()
                .zip(&trace.input[..e])
            {
                *g += dz * xi;
            }
            grads[l.ego_b + fi] += dz;
        }
        // Pool routing and conv stack.
        let mut d_conv1 = vec![0.0f64; c];
        for ci in 0..c {
            let dp = d_concat[f + ci];
            if dp == 0.0 {
                continue;
            }
            let vi = trace.pool_arg[ci];
            if trace.conv2_z[vi * c + ci] <= 0.0 {
                continue;
            }
            // conv2 weight/bias gradients for the winning vehicle.
            let conv1_a = &trace.conv1_a[vi * c..(vi + 1) * c];
            for (g, xi) in grads[l.conv2_w + ci * c..l.conv2_w + (ci + 1) * c]
                .iter_mut()
                .zip(conv1_a)
            {
                *g += dp * xi;
            }
            grads[l.conv2_b + ci] += dp;
            for (dd, wi) in d_conv1
                .iter_mut()
                .zip(&wt[l.conv2_w + ci * c..l.conv2_w + (ci + 1) * c])
            {
                *dd = dp * *wi as f64;
            }
            // conv1 backward, same vehicle only.
            let xin = &trace.input[e + vi * p..e + (vi + 1) * p];
            for c1 in 0..c {
                if trace.conv1_z[vi * c + c1] <= 0.0 {
                    continue;
                }
                let dz = d_conv1[c1];
                if dz == 0.0 {
                    continue;
                }
                for (g, xi) in grads[l.conv1_w + c1 * p..l.conv1_w + (c1 + 1) * p]
                    .iter_mut()
                    .zip(xin)
                {
                    *g += dz * xi;
                }
                grads[l.conv1_b + c1] += dz;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_spec(quantile: bool, dueling: bool) -> NetworkSpec {
        NetworkSpec {
            ego_input_width: 1,
            per_vehicle_width: 1,
            max_vehicles: 1,
            conv_filters: 1,
            fc_units: 1,
            embedding_dims: 1,
            embedding_fc_units: 2,
            action_count: 1,
            has_quantile_head: quantile,
            dueling,
        }
    }

    #[test]
    fn zero_weights_give_zero_outputs() {
        let spec = NetworkSpec::desk(2, 4, true);
        let net = Network::new(spec.clone()).unwrap();
        let w = WeightSet::zeros(&spec);
        let x = vec![0.3f32; spec.input_width()];
        let qb = net.forward_quantiles(&w, &x, &[0.1, 0.5, 0.9]).unwrap();
        assert!(qb.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_is_deterministic() {
        let spec = NetworkSpec::desk(2, 4, true);
        let net = Network::new(spec.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = WeightSet::init(&spec, &mut rng);
        let x: Vec<f32> = (0..spec.input_width()).map(|i| (i as f32 * 0.13).sin()).collect();
        let a = net.forward_quantiles(&w, &x, &[0.25, 0.75]).unwrap();
        let b = net.forward_quantiles(&w, &x, &[0.25, 0.75]).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn embedding_matches_cosines() {
        let phi = quantile_embedding(0.0, 8).unwrap();
        assert!(phi.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let phi = quantile_embedding(1.0, 8).unwrap();
        for (i, v) in phi.iter().enumerate() {
            let expect = if (i + 1) % 2 == 0 { 1.0 } else { -1.0 };
            assert!((v - expect).abs() < 1e-12);
        }
        // tau = 0.5 cycles (0, -1, 0, 1, ...) over j = 1, 2, 3, 4.
        let phi = quantile_embedding(0.5, 8).unwrap();
        for (i, v) in phi.iter().enumerate() {
            let expect = match (i + 1) % 4 {
                0 => 1.0,
                2 => -1.0,
                _ => 0.0,
            };
            assert!((v - expect).abs() < 1e-12, "j={} got {}", i + 1, v);
        }
        assert!(quantile_embedding(1.2, 4).is_err());
    }

    /// Hand-computed forward pass through the 1-wide network.
    ///
    /// Weights: ego w=0.5 b=0.1, conv1 w=-1 b=0.2, conv2 w=2 b=0, fc1
    /// w=[0.3, -0.4] b=0, fc2 w=1.5 b=0.05, out w=-2 b=1. Input x=[1, -1].
    ///   ego_a   = relu(0.5*1 + 0.1)            = 0.6
    ///   conv1_a = relu(-1*-1 + 0.2)            = 1.2
    ///   conv2_a = relu(2*1.2)                  = 2.4 -> pool 2.4
    ///   fc1_a   = relu(0.3*0.6 - 0.4*2.4)      = relu(-0.78) = 0
    ///   fc2_a   = relu(1.5*0 + 0.05)           = 0.05
    ///   out     = -2*0.05 + 1                  = 0.9
    #[test]
    fn hand_computed_tiny_forward() {
        let spec = tiny_spec(false, false);
        let net = Network::new(spec.clone()).unwrap();
        let mut w = WeightSet::zeros(&spec);
        let l = spec.layout();
        let d = w.as_mut_slice();
        d[l.ego_w] = 0.5;
        d[l.ego_b] = 0.1;
        d[l.conv1_w] = -1.0;
        d[l.conv1_b] = 0.2;
        d[l.conv2_w] = 2.0;
        d[l.fc1_w] = 0.3;
        d[l.fc1_w + 1] = -0.4;
        d[l.fc2_w] = 1.5;
        d[l.fc2_b] = 0.05;
        d[l.adv_w] = -2.0;
        d[l.adv_b] = 1.0;
        let out = net.forward(&w, &[1.0, -1.0]).unwrap();
        assert!((out[0] - 0.9).abs() < 1e-6, "got {}", out[0]);
    }

    #[test]
    fn quantile_invariance_with_zeroed_embedding() {
        let spec = NetworkSpec::desk(2, 3, true);
        let net = Network::new(spec.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut w = WeightSet::init(&spec, &mut rng);
        let l = spec.layout();
        for g in &mut w.as_mut_slice()[l.emb_w..l.fc1_w] {
            *g = 0.0;
        }
        let x: Vec<f32> = (0..spec.input_width()).map(|i| ((i * 7) % 5) as f32 / 5.0).collect();
        let qb = net.forward_quantiles(&w, &x, &[0.05, 0.4, 0.99]).unwrap();
        let a = spec.action_count;
        for row in 1..qb.taus.len() {
            for ai in 0..a {
                assert_eq!(qb.value(row, ai), qb.value(0, ai));
            }
        }
    }

    #[test]
    fn dueling_is_invariant_to_constant_advantage_shift() {
        let spec = NetworkSpec::desk(2, 3, false);
        let net = Network::new(spec.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let w = WeightSet::init(&spec, &mut rng);
        let x: Vec<f32> = (0..spec.input_width()).map(|i| (i as f32 * 0.21).cos()).collect();
        let base = net.forward(&w, &x).unwrap();
        let mut shifted = w.clone();
        let l = spec.layout();
        for b in &mut shifted.as_mut_slice()[l.adv_b..l.adv_b + spec.action_count] {
            *b += 3.25;
        }
        let out = net.forward(&shifted, &x).unwrap();
        for (a, b) in base.iter().zip(&out) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    /// Central finite differences on a quadratic loss over the outputs.
    /// Parameters whose perturbation flips any ReLU sign or pool argmax are
    /// skipped (kink crossing), as are parameters with a pre-activation
    /// within 1e-6 of zero.
    #[test]
    fn gradient_matches_finite_differences() {
        let specs = [
            tiny_spec(false, false),
            NetworkSpec::desk(2, 3, false),
            NetworkSpec::desk(2, 3, true),
        ];
        for (si, spec) in specs.iter().enumerate() {
            let net = Network::new(spec.clone()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(100 + si as u64);
            let w = WeightSet::init(spec, &mut rng);
            let x: Vec<f32> = (0..spec.input_width())
                .map(|i| (((i + 1) as f32 * 0.37).sin() * 0.8))
                .collect();
            let taus: Option<Vec<f64>> = spec.has_quantile_head.then(|| vec![0.2, 0.7]);
            let targets = [0.4, -0.3, 0.8, 1.1, -0.9, 0.2];

            let loss_of = |ws: &WeightSet, trace: &mut Trace| -> f64 {
                net.forward_into(ws, &x, taus.as_deref(), trace).unwrap();
                trace
                    .outputs()
                    .iter()
                    .zip(targets.iter().cycle())
                    .map(|(o, t)| 0.5 * (o - t) * (o - t))
                    .sum()
            };

            let mut trace = Trace::default();
            let base_loss = loss_of(&w, &mut trace);
            assert!(base_loss.is_finite());
            let d_out: Vec<f64> = trace
                .outputs()
                .iter()
                .zip(targets.iter().cycle())
                .map(|(o, t)| o - t)
                .collect();
            let mut grads = vec![0.0; spec.param_count()];
            net.backward(&w, &trace, &d_out, &mut grads).unwrap();

            let h = 1e-5f64;
            let mut checked = 0usize;
            let mut tp = Trace::default();
            let mut tm = Trace::default();
            for i in 0..spec.param_count() {
                let orig = w.as_slice()[i];
                let mut wp = w.clone();
                wp.as_mut_slice()[i] = (orig as f64 + h) as f32;
                let mut wm = w.clone();
                wm.as_mut_slice()[i] = (orig as f64 - h) as f32;
                let lp = loss_of(&wp, &mut tp);
                let lm = loss_of(&wm, &mut tm);
                if tp.kink_signature() != tm.kink_signature()
                    || tp.min_abs_preactivation() < 1e-6
                    || tm.min_abs_preactivation() < 1e-6
                {
                    continue;
                }
                let denom = (wp.as_slice()[i] as f64) - (wm.as_slice()[i] as f64);
                let fd = (lp - lm) / denom;
                let scale = fd.abs().max(grads[i].abs()).max(1e-6);
                assert!(
                    (fd - grads[i]).abs() / scale < 1e-4,
                    "spec {si} param {i}: fd {fd} vs analytic {}",
                    grads[i]
                );
                checked += 1;
            }
            assert!(checked > spec.param_count() / 2, "too few params checked");
        }
    }

    #[test]
    fn rejects_structural_errors() {
        let spec = NetworkSpec::desk(2, 3, true);
        let net = Network::new(spec.clone()).unwrap();
        let w = WeightSet::zeros(&spec);
        let x = vec![0.0f32; spec.input_width()];
        assert!(net.forward_quantiles(&w, &x[1..], &[0.5]).is_err());
        assert!(net.forward_quantiles(&w, &x, &[]).is_err());
        let mut bad = x.clone();
        bad[0] = f32::NAN;
        assert!(net.forward_quantiles(&w, &bad, &[0.5]).is_err());
        // backward without forward
        let trace = Trace::default();
        let mut grads = vec![0.0; spec.param_count()];
        assert!(net.backward(&w, &trace, &[0.0; 3], &mut grads).is_err());
    }
}
