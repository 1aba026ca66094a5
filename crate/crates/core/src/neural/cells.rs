//! GRU and LSTM cells, as graph ops for training and as plain tensor
//! steps for generation. Both paths run the same tensor kernels in the
//! same order, so their outputs are bit-identical.
//!
//! GRU: z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br),
//!      cand = tanh(Wh x + Uh (r*h) + bh), h' = (1-z)*cand + z*h.
//! LSTM: the exposed state is the cell and output states concatenated
//! [c ++ h]; forget-gate bias starts at 1.

use crate::error::{Error, Result};
use crate::neural::{Graph, Init, NodeId, ParameterSet};
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Gru,
    Lstm,
}

impl std::str::FromStr for Gate {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gru" => Ok(Gate::Gru),
            "lstm" => Ok(Gate::Lstm),
            other => Err(Error::InvalidInput(format!("unknown gate kind: {other}"))),
        }
    }
}

impl Gate {
    pub fn as_str(&self) -> &'static str {
        match self {
            Gate::Gru => "gru",
            Gate::Lstm => "lstm",
        }
    }
}

/// One recurrent cell: its gate kind, dimensions and parameter prefix.
#[derive(Debug, Clone)]
pub struct CellSpec {
    pub gate: Gate,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub prefix: String,
}

const GRU_GATES: [&str; 3] = ["z", "r", "h"];
const LSTM_GATES: [&str; 4] = ["i", "f", "o", "c"];

impl CellSpec {
    pub fn new(gate: Gate, input_dim: usize, hidden_dim: usize, prefix: impl Into<String>) -> Self {
        CellSpec {
            gate,
            input_dim,
            hidden_dim,
            prefix: prefix.into(),
        }
    }

    /// Size of the state vector this cell carries (2x hidden for LSTM).
    pub fn state_dim(&self) -> usize {
        match self.gate {
            Gate::Gru => self.hidden_dim,
            Gate::Lstm => 2 * self.hidden_dim,
        }
    }

    /// Size of the readout the rest of the network sees.
    pub fn output_dim(&self) -> usize {
        self.hidden_dim
    }

    fn name(&self, kind: &str, gate: &str) -> String {
        format!("{}.{kind}_{gate}", self.prefix)
    }

    pub fn register<T: Real>(&self, params: &mut ParameterSet<T>) -> Result<()> {
        let gates: &[&str] = match self.gate {
            Gate::Gru => &GRU_GATES,
            Gate::Lstm => &LSTM_GATES,
        };
        let d = self.hidden_dim;
        for gate in gates {
            params.register(&self.name("w", gate), &[d, self.input_dim], Init::Gaussian(0.01))?;
            params.register(&self.name("u", gate), &[d, d], Init::Orthogonal)?;
            let bias_init = if self.gate == Gate::Lstm && *gate == "f" {
                Init::Constant(1.0)
            } else {
                Init::Zeros
            };
            params.register(&self.name("b", gate), &[d], bias_init)?;
        }
        Ok(())
    }

    fn check_shapes<T: Real>(&self, state: &Tensor<T>, x: &Tensor<T>) -> Result<()> {
        if state.len() != self.state_dim() {
            return Err(Error::Shape {
                name: format!("{} state", self.prefix),
                expected: vec![self.state_dim()],
                got: state.shape().to_vec(),
            });
        }
        if x.len() != self.input_dim {
            return Err(Error::Shape {
                name: format!("{} input", self.prefix),
                expected: vec![self.input_dim],
                got: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// One step as graph nodes (differentiable).
    pub fn step<T: Real>(&self, g: &mut Graph<T>, state: NodeId, x: NodeId) -> Result<NodeId> {
        self.check_shapes(g.value(state), g.value(x))?;
        let gate_pre = |g: &mut Graph<T>, spec: &CellSpec, name: &str, x: NodeId, h: NodeId| -> Result<NodeId> {
            let w = g.param(&spec.name("w", name))?;
            let u = g.param(&spec.name("u", name))?;
            let b = g.param(&spec.name("b", name))?;
            let wx = g.matvec(w, x)?;
            let uh = g.matvec(u, h)?;
            let s = g.add(wx, uh)?;
            g.add(s, b)
        };
        match self.gate {
            Gate::Gru => {
                let h = state;
                let z_pre = gate_pre(g, self, "z", x, h)?;
                let z = g.sigmoid(z_pre);
                let r_pre = gate_pre(g, self, "r", x, h)?;
                let r = g.sigmoid(r_pre);
                let rh = g.mul(r, h)?;
                let c_pre = gate_pre(g, self, "h", x, rh)?;
                let cand = g.tanh(c_pre);
                // (1 - z) * cand + z * h
                let zc = g.mul(z, cand)?;
                let zh = g.mul(z, h)?;
                let keep = g.sub(cand, zc)?;
                g.add(keep, zh)
            }
            Gate::Lstm => {
                let d = self.hidden_dim;
                let c = g.slice(state, 0, d)?;
                let h = g.slice(state, d, d)?;
                let i_pre = gate_pre(g, self, "i", x, h)?;
                let i = g.sigmoid(i_pre);
                let f_pre = gate_pre(g, self, "f", x, h)?;
                let f = g.sigmoid(f_pre);
                let o_pre = gate_pre(g, self, "o", x, h)?;
                let o = g.sigmoid(o_pre);
                let g_pre = gate_pre(g, self, "c", x, h)?;
                let cand = g.tanh(g_pre);
                let fc = g.mul(f, c)?;
                let ig = g.mul(i, cand)?;
                let c_next = g.add(fc, ig)?;
                let tc = g.tanh(c_next);
                let h_next = g.mul(o, tc)?;
                Ok(g.concat(c_next, h_next))
            }
        }
    }

    /// The part of a state node fed to readouts and downstream RNNs.
    pub fn output<T: Real>(&self, g: &mut Graph<T>, state: NodeId) -> Result<NodeId> {
        match self.gate {
            Gate::Gru => Ok(state),
            Gate::Lstm => g.slice(state, self.hidden_dim, self.hidden_dim),
        }
    }

    /// One step on plain tensors (no gradients): same kernels and order
    /// as [`CellSpec::step`].
    pub fn step_value<T: Real>(
        &self,
        params: &ParameterSet<T>,
        state: &Tensor<T>,
        x: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        self.check_shapes(state, x)?;
        let gate_pre = |name: &str, x: &Tensor<T>, h: &Tensor<T>| -> Result<Tensor<T>> {
            let w = params.get(&self.name("w", name))?;
            let u = params.get(&self.name("u", name))?;
            let b = params.get(&self.name("b", name))?;
            w.matvec(x)?.add(&u.matvec(h)?)?.add(b)
        };
        let sigmoid = |t: Tensor<T>| t.map(|v| T::one() / (T::one() + (-v).exp()));
        match self.gate {
            Gate::Gru => {
                let h = state;
                let z = sigmoid(gate_pre("z", x, h)?);
                let r = sigmoid(gate_pre("r", x, h)?);
                let rh = r.mul(h)?;
                let cand = gate_pre("h", x, &rh)?.map(|v| v.tanh());
                let zc = z.mul(&cand)?;
                let zh = z.mul(h)?;
                cand.sub(&zc)?.add(&zh)
            }
            Gate::Lstm => {
                let d = self.hidden_dim;
                let c = state.slice(0, d)?;
                let h = state.slice(d, d)?;
                let i = sigmoid(gate_pre("i", x, &h)?);
                let f = sigmoid(gate_pre("f", x, &h)?);
                let o = sigmoid(gate_pre("o", x, &h)?);
                let cand = gate_pre("c", x, &h)?.map(|v| v.tanh());
                let c_next = f.mul(&c)?.add(&i.mul(&cand)?)?;
                let h_next = o.mul(&c_next.map(|v| v.tanh()))?;
                Ok(c_next.concat(&h_next))
            }
        }
    }

    pub fn output_value<T: Real>(&self, state: &Tensor<T>) -> Result<Tensor<T>> {
        match self.gate {
            Gate::Gru => Ok(state.clone()),
            Gate::Lstm => state.slice(self.hidden_dim, self.hidden_dim),
        }
    }
}

/// One GRU step under the given parameter prefix.
pub fn gru_step<T: Real>(
    params: &ParameterSet<T>,
    prefix: &str,
    h_prev: &Tensor<T>,
    x: &Tensor<T>,
) -> Result<Tensor<T>> {
    let spec = CellSpec::new(Gate::Gru, x.len(), h_prev.len(), prefix);
    spec.step_value(params, h_prev, x)
}

/// One LSTM step; `state` is the cell and output states concatenated.
pub fn lstm_step<T: Real>(
    params: &ParameterSet<T>,
    prefix: &str,
    state: &Tensor<T>,
    x: &Tensor<T>,
) -> Result<Tensor<T>> {
    if state.len() % 2 != 0 {
        return Err(Error::Shape {
            name: format!("{prefix} state"),
            expected: vec![state.len() + 1],
            got: state.shape().to_vec(),
        });
    }
    let spec = CellSpec::new(Gate::Lstm, x.len(), state.len() / 2, prefix);
    spec.step_value(params, state, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_params(spec: &CellSpec) -> ParameterSet<f64> {
        let mut ps = ParameterSet::new();
        spec.register(&mut ps).unwrap();
        // leave everything at zero (no initialize call)
        ps
    }

    #[test]
    fn gru_zero_weights_halves_state() {
        let spec = CellSpec::new(Gate::Gru, 2, 2, "g");
        let ps = zero_params(&spec);
        let h = Tensor::vector(vec![0.4, -0.2]);
        let x = Tensor::vector(vec![1.0, 2.0]);
        let next = gru_step(&ps, "g", &h, &x).unwrap();
        assert_eq!(next.data(), &[0.2, -0.1]);
    }

    #[test]
    fn gru_zero_state_fixed_point() {
        let spec = CellSpec::new(Gate::Gru, 3, 2, "g");
        let ps = zero_params(&spec);
        let h = Tensor::vector(vec![0.0, 0.0]);
        let x = Tensor::vector(vec![0.0, 0.0, 0.0]);
        let next = gru_step(&ps, "g", &h, &x).unwrap();
        assert_eq!(next.data(), &[0.0, 0.0]);
    }

    #[test]
    fn lstm_zero_weights() {
        let spec = CellSpec::new(Gate::Lstm, 2, 2, "l");
        let ps = zero_params(&spec);
        // zero state stays zero
        let s = Tensor::vector(vec![0.0; 4]);
        let x = Tensor::vector(vec![0.5, -0.5]);
        let next = lstm_step(&ps, "l", &s, &x).unwrap();
        assert_eq!(next.data(), &[0.0; 4]);

        // gates at 0.5: c' = 0.5 c, h' = 0.5 tanh(0.5 c)
        let c = [0.8, -0.4];
        let s = Tensor::vector(vec![c[0], c[1], 0.3, 0.1]);
        let next = lstm_step(&ps, "l", &s, &x).unwrap();
        for k in 0..2 {
            assert!((next.data()[k] - 0.5 * c[k]).abs() < 1e-15);
            assert!((next.data()[2 + k] - 0.5 * (0.5 * c[k]).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_mismatch_names_the_cell() {
        let spec = CellSpec::new(Gate::Gru, 2, 2, "enc");
        let ps = zero_params(&spec);
        let h = Tensor::vector(vec![0.0, 0.0, 0.0]);
        let x = Tensor::vector(vec![0.0, 0.0]);
        let err = spec.step_value(&ps, &h, &x).unwrap_err();
        match err {
            crate::Error::Shape { name, .. } => assert!(name.contains("enc")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    // scalar oracle: recompute each gate equation coordinate-wise
    fn scalar_gru(
        ps: &ParameterSet<f64>,
        spec: &CellSpec,
        h: &[f64],
        x: &[f64],
    ) -> Vec<f64> {
        let d = spec.hidden_dim;
        let e = spec.input_dim;
        let m = |name: &str| ps.get(name).unwrap().data().to_vec();
        let (wz, uz, bz) = (m("g.w_z"), m("g.u_z"), m("g.b_z"));
        let (wr, ur, br) = (m("g.w_r"), m("g.u_r"), m("g.b_r"));
        let (wh, uh, bh) = (m("g.w_h"), m("g.u_h"), m("g.b_h"));
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut out = vec![0.0; d];
        for i in 0..d {
            let mut z = bz[i];
            let mut r = br[i];
            for j in 0..e {
                z += wz[i * e + j] * x[j];
                r += wr[i * e + j] * x[j];
            }
            for j in 0..d {
                z += uz[i * d + j] * h[j];
                r += ur[i * d + j] * h[j];
            }
            let z = sig(z);
            let r_full: Vec<f64> = (0..d)
                .map(|k| {
                    let mut rv = br[k];
                    for j in 0..e {
                        rv += wr[k * e + j] * x[j];
                    }
                    for j in 0..d {
                        rv += ur[k * d + j] * h[j];
                    }
                    sig(rv)
                })
                .collect();
            let _ = r;
            let mut cand = bh[i];
            for j in 0..e {
                cand += wh[i * e + j] * x[j];
            }
            for j in 0..d {
                cand += uh[i * d + j] * (r_full[j] * h[j]);
            }
            let cand = cand.tanh();
            out[i] = (1.0 - z) * cand + z * h[i];
        }
        out
    }

    #[test]
    fn gru_matches_scalar_oracle() {
        let spec = CellSpec::new(Gate::Gru, 2, 3, "g");
        let mut ps = ParameterSet::new();
        spec.register(&mut ps).unwrap();
        for seed in 0..20 {
            ps.initialize(seed);
            // scale some weights up so gates are not near the identity
            ps.get_mut("g.w_z").unwrap().scale_in_place(50.0);
            ps.get_mut("g.u_r").unwrap().scale_in_place(1.7);
            let h = Tensor::vector(vec![0.3, -0.8, 0.25]);
            let x = Tensor::vector(vec![-1.1, 0.6]);
            let got = gru_step(&ps, "g", &h, &x).unwrap();
            let want = scalar_gru(&ps, &spec, h.data(), x.data());
            for (a, b) in got.data().iter().zip(want.iter()) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    fn scalar_lstm(ps: &ParameterSet<f64>, d: usize, e: usize, s: &[f64], x: &[f64]) -> Vec<f64> {
        let m = |name: &str| ps.get(name).unwrap().data().to_vec();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let (c, h) = s.split_at(d);
        let gate = |w: &[f64], u: &[f64], b: &[f64], i: usize| -> f64 {
            let mut v = b[i];
            for j in 0..e {
                v += w[i * e + j] * x[j];
            }
            for j in 0..d {
                v += u[i * d + j] * h[j];
            }
            v
        };
        let mut out = vec![0.0; 2 * d];
        for i in 0..d {
            let iv = sig(gate(&m("l.w_i"), &m("l.u_i"), &m("l.b_i"), i));
            let fv = sig(gate(&m("l.w_f"), &m("l.u_f"), &m("l.b_f"), i));
            let ov = sig(gate(&m("l.w_o"), &m("l.u_o"), &m("l.b_o"), i));
            let gv = gate(&m("l.w_c"), &m("l.u_c"), &m("l.b_c"), i).tanh();
            let c_next = fv * c[i] + iv * gv;
            out[i] = c_next;
            out[d + i] = ov * c_next.tanh();
        }
        out
    }

    #[test]
    fn lstm_matches_scalar_oracle() {
        let spec = CellSpec::new(Gate::Lstm, 3, 2, "l");
        let mut ps = ParameterSet::new();
        spec.register(&mut ps).unwrap();
        for seed in 0..20 {
            ps.initialize(100 + seed);
            ps.get_mut("l.w_i").unwrap().scale_in_place(30.0);
            let s = Tensor::vector(vec![0.2, -0.5, 0.9, -0.1]);
            let x = Tensor::vector(vec![0.4, -0.3, 1.2]);
            let got = lstm_step(&ps, "l", &s, &x).unwrap();
            let want = scalar_lstm(&ps, 2, 3, s.data(), x.data());
            for (a, b) in got.data().iter().zip(want.iter()) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn graph_step_matches_value_step_bitwise() {
        for gate in [Gate::Gru, Gate::Lstm] {
            let spec = CellSpec::new(gate, 2, 3, "c");
            let mut ps = ParameterSet::new();
            spec.register(&mut ps).unwrap();
            ps.initialize(42);
            let state = Tensor::vector(vec![0.1; spec.state_dim()]);
            let x = Tensor::vector(vec![0.7, -0.4]);
            let value = spec.step_value(&ps, &state, &x).unwrap();

            let mut g = Graph::new(&ps);
            let s = g.constant(state.clone());
            let xn = g.constant(x.clone());
            let next = spec.step(&mut g, s, xn).unwrap();
            assert_eq!(g.value(next), &value);
        }
    }
}
