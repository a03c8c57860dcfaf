//! The recurrent cell. Input and previous hidden state are summed before
//! each gate: `z = x + s_prev`, `gate = act(W z + b)`.

use super::params::{GATE_F, GATE_G, GATE_I, GATE_O};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub s: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            s: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }

    pub fn hidden(&self) -> usize {
        self.s.len()
    }
}

/// Borrowed weights of one layer and direction. `w[g]` is `[hidden][hidden]`
/// (row = output unit), gates ordered i, f, o, g.
#[derive(Clone, Copy, Debug)]
pub struct LstmCell<'a> {
    pub w: [&'a [f64]; 4],
    pub b: [&'a [f64]; 4],
    hidden: usize,
}

impl<'a> LstmCell<'a> {
    pub fn new(w: [&'a [f64]; 4], b: [&'a [f64]; 4]) -> Result<Self> {
        let hidden = b[0].len();
        if hidden == 0 {
            return Err(Error::Dimension("lstm hidden size is zero".into()));
        }
        for g in 0..4 {
            if b[g].len() != hidden || w[g].len() != hidden * hidden {
                return Err(Error::Dimension(format!(
                    "lstm gate {g}: expected {hidden}x{hidden} weights and {hidden} biases, got {} and {}",
                    w[g].len(),
                    b[g].len()
                )));
            }
        }
        Ok(LstmCell { w, b, hidden })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }
}

/// Gate activations of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Gates {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct StepTrace {
    pub z: Vec<f64>,
    pub gates: [Vec<f64>; 4],
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub s: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check(cell: &LstmCell, x: &[f64], prev: &LstmState) -> Result<()> {
    let h = cell.hidden;
    if x.len() != h || prev.s.len() != h || prev.c.len() != h {
        return Err(Error::Dimension(format!(
            "lstm step: hidden {h}, input {}, state {}/{}",
            x.len(),
            prev.s.len(),
            prev.c.len()
        )));
    }
    Ok(())
}

pub(crate) fn step_traced(cell: &LstmCell, x: &[f64], prev: &LstmState) -> StepTrace {
    let h = cell.hidden;
    let z: Vec<f64> = x.iter().zip(&prev.s).map(|(a, b)| a + b).collect();
    let gates: [Vec<f64>; 4] = std::array::from_fn(|g| {
        (0..h)
            .map(|j| {
                let row = &cell.w[g][j * h..(j + 1) * h];
                let a = cell.b[g][j] + row.iter().zip(&z).map(|(w, z)| w * z).sum::<f64>();
                if g == GATE_G {
                    a.tanh()
                } else {
                    sigmoid(a)
                }
            })
            .collect()
    });
    let c: Vec<f64> = (0..h)
        .map(|j| prev.c[j] * gates[GATE_F][j] + gates[GATE_G][j] * gates[GATE_I][j])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let s = (0..h).map(|j| tanh_c[j] * gates[GATE_O][j]).collect();
    StepTrace {
        z,
        gates,
        c,
        tanh_c,
        s,
    }
}

/// One step of the cell, returning the gate activations alongside the new state.
pub fn lstm_gates(cell: &LstmCell, x: &[f64], prev: &LstmState) -> Result<(Gates, LstmState)> {
    check(cell, x, prev)?;
    let t = step_traced(cell, x, prev);
    let [i, f, o, g] = t.gates;
    Ok((Gates { i, f, o, g }, LstmState { s: t.s, c: t.c }))
}

pub fn lstm_cell_step(cell: &LstmCell, x: &[f64], prev: &LstmState) -> Result<LstmState> {
    lstm_gates(cell, x, prev).map(|(_, s)| s)
}

/// Gradients of one step. `ds`/`dc` arrive from above and from the next
/// step; returns pre-activation gradients per gate, `dz` and `dc_prev`.
pub(crate) fn step_backward(
    cell: &LstmCell,
    t: &StepTrace,
    c_prev: &[f64],
    ds: &[f64],
    dc_next: &[f64],
) -> ([Vec<f64>; 4], Vec<f64>, Vec<f64>) {
    let h = cell.hidden;
    let [gi, gf, go, gg] = &t.gates;
    let mut da: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; h]);
    let mut dc_prev = vec![0.0; h];
    for j in 0..h {
        let dc = dc_next[j] + ds[j] * go[j] * (1.0 - t.tanh_c[j] * t.tanh_c[j]);
        let d_o = ds[j] * t.tanh_c[j];
        let d_f = dc * c_prev[j];
        let d_g = dc * gi[j];
        let d_i = dc * gg[j];
        dc_prev[j] = dc * gf[j];
        da[GATE_I][j] = d_i * gi[j] * (1.0 - gi[j]);
        da[GATE_F][j] = d_f * gf[j] * (1.0 - gf[j]);
        da[GATE_O][j] = d_o * go[j] * (1.0 - go[j]);
        da[GATE_G][j] = d_g * (1.0 - gg[j] * gg[j]);
    }
    let mut dz = vec![0.0; h];
    for g in 0..4 {
        for (j, &d) in da[g].iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for (dzk, w) in dz.iter_mut().zip(&cell.w[g][j * h..(j + 1) * h]) {
                *dzk += d * w;
            }
        }
    }
    (da, dz, dc_prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn owned(h: usize, w: f64, b: [f64; 4]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (
            (0..4).map(|_| vec![w; h * h]).collect(),
            b.iter().map(|&v| vec![v; h]).collect(),
        )
    }

    fn cell<'a>(w: &'a [Vec<f64>], b: &'a [Vec<f64>]) -> LstmCell<'a> {
        LstmCell::new(
            std::array::from_fn(|g| w[g].as_slice()),
            std::array::from_fn(|g| b[g].as_slice()),
        )
        .unwrap()
    }

    #[test]
    fn all_zero_cell() {
        let (w, b) = owned(3, 0.0, [0.0; 4]);
        let (g, st) = lstm_gates(&cell(&w, &b), &[0.0; 3], &LstmState::zeros(3)).unwrap();
        assert_eq!(g.i, vec![0.5; 3]);
        assert_eq!(g.f, vec![0.5; 3]);
        assert_eq!(g.o, vec![0.5; 3]);
        assert_eq!(g.g, vec![0.0; 3]);
        assert_eq!(st, LstmState::zeros(3));
    }

    #[test]
    fn scalar_case() {
        let (w, b) = owned(1, 1.0, [0.0; 4]);
        let (g, st) = lstm_gates(&cell(&w, &b), &[1.0], &LstmState::zeros(1)).unwrap();
        assert!((g.i[0] - 0.7311).abs() < 1e-4);
        assert!((g.g[0] - 0.7616).abs() < 1e-4);
        assert!((st.c[0] - 0.5568).abs() < 1e-4);
        assert!((st.s[0] - 0.3697).abs() < 1e-4);
    }

    #[test]
    fn saturated_forget_carries_cell() {
        let (mut w, b) = owned(2, 0.0, [0.0, 10.0, 0.0, 0.0]);
        w[GATE_O] = vec![0.3; 4];
        let prev = LstmState {
            s: vec![0.2, -0.1],
            c: vec![0.8, -0.6],
        };
        let st = lstm_cell_step(&cell(&w, &b), &[0.5, 0.5], &prev).unwrap();
        for j in 0..2 {
            assert!((st.c[j] - prev.c[j]).abs() < 1e-3);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let (w, b) = owned(2, 0.0, [0.0; 4]);
        assert!(lstm_cell_step(&cell(&w, &b), &[1.0], &LstmState::zeros(2)).is_err());
    }

    proptest! {
        #[test]
        fn gate_bounds_and_cell_growth(
            ws in proptest::collection::vec(-1.0f64..1.0, 4 * 9),
            bs in proptest::collection::vec(-1.0f64..1.0, 4 * 3),
            xs in proptest::collection::vec(-1.0f64..1.0, 3 * 6),
        ) {
            let w: Vec<Vec<f64>> = ws.chunks(9).map(<[f64]>::to_vec).collect();
            let b: Vec<Vec<f64>> = bs.chunks(3).map(<[f64]>::to_vec).collect();
            let cell = cell(&w, &b);
            let mut st = LstmState::zeros(3);
            let mut max_g: f64 = 0.0;
            for (t, x) in xs.chunks(3).enumerate() {
                let (g, next) = lstm_gates(&cell, x, &st).unwrap();
                for v in g.i.iter().chain(&g.f).chain(&g.o) {
                    prop_assert!(*v > 0.0 && *v < 1.0);
                }
                for v in &g.g {
                    prop_assert!(v.abs() < 1.0);
                    max_g = max_g.max(v.abs());
                }
                for c in &next.c {
                    prop_assert!(c.abs() <= (t + 1) as f64 * max_g + 1e-12);
                }
                st = next;
            }
        }
    }
}
