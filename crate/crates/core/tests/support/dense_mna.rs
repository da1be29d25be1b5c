//! Brute-force oracle: dense MNA on the exported text of a linear netlist,
//! solved by Gaussian elimination with partial pivoting.

#![allow(dead_code)]

pub struct DenseSolution {
    /// Voltage of every node, ground included.
    pub voltages: Vec<f64>,
    /// Current into each column's sink resistor, by column.
    pub sense: Vec<f64>,
}

struct Branch {
    a: usize,
    b: usize,
    r: f64,
    sense: Option<usize>,
}

/// `None` when the netlist holds a non-linear device.
pub fn solve_text(text: &str) -> Option<DenseSolution> {
    let mut nodes = 0;
    let mut fixed: Vec<Option<f64>> = Vec::new();
    let mut branches = Vec::new();
    for line in text.lines() {
        let f: Vec<&str> = line.split_whitespace().collect();
        match f.first().copied() {
            Some("nodes") => {
                nodes = f[1].parse().unwrap();
                fixed = vec![None; nodes];
                fixed[0] = Some(0.0);
            }
            Some("V") => fixed[f[1].parse::<usize>().unwrap()] = Some(f[2].parse().unwrap()),
            Some("R") => branches.push(Branch {
                a: f[1].parse().unwrap(),
                b: f[2].parse().unwrap(),
                r: f[3].parse().unwrap(),
                sense: (f.get(4) == Some(&"sense")).then(|| f[5].parse().unwrap()),
            }),
            Some("C") => {
                let r = f[3].strip_prefix("lin:")?.parse().unwrap();
                branches.push(Branch {
                    a: f[1].parse().unwrap(),
                    b: f[2].parse().unwrap(),
                    r,
                    sense: None,
                });
            }
            _ => {}
        }
    }
    let mut index = vec![usize::MAX; nodes];
    let mut n = 0;
    for (k, v) in fixed.iter().enumerate() {
        if v.is_none() {
            index[k] = n;
            n += 1;
        }
    }
    let shorts: Vec<usize> = (0..branches.len()).filter(|&k| branches[k].r == 0.0).collect();
    let size = n + shorts.len();
    let mut a = vec![vec![0.0; size]; size];
    let mut rhs = vec![0.0; size];
    // KCL rows: sum of currents leaving each free node is zero.
    let stamp_current = |a: &mut Vec<Vec<f64>>, rhs: &mut Vec<f64>, node: usize, sign: f64, coef: &[(usize, f64)], konst: f64| {
        if index[node] == usize::MAX {
            return;
        }
        let row = index[node];
        for &(col, c) in coef {
            a[row][col] += sign * c;
        }
        rhs[row] -= sign * konst;
    };
    let volt = |node: usize| -> (Option<usize>, f64) {
        match fixed[node] {
            Some(v) => (None, v),
            None => (Some(index[node]), 0.0),
        }
    };
    for (k, br) in branches.iter().enumerate() {
        // Current a -> b expressed as coefficients on unknowns plus a constant.
        let (coef, konst): (Vec<(usize, f64)>, f64) = if br.r == 0.0 {
            let j = n + shorts.iter().position(|&s| s == k).unwrap();
            (vec![(j, 1.0)], 0.0)
        } else {
            let g = 1.0 / br.r;
            let (ia, va) = volt(br.a);
            let (ib, vb) = volt(br.b);
            let mut c = Vec::new();
            if let Some(i) = ia {
                c.push((i, g));
            }
            if let Some(i) = ib {
                c.push((i, -g));
            }
            (c, g * (va - vb))
        };
        stamp_current(&mut a, &mut rhs, br.a, 1.0, &coef, konst);
        stamp_current(&mut a, &mut rhs, br.b, -1.0, &coef, konst);
    }
    // Zero-ohm branches: V_a − V_b = 0.
    for (s, &k) in shorts.iter().enumerate() {
        let row = n + s;
        let br = &branches[k];
        let (ia, va) = volt(br.a);
        let (ib, vb) = volt(br.b);
        if let Some(i) = ia {
            a[row][i] += 1.0;
        }
        if let Some(i) = ib {
            a[row][i] -= 1.0;
        }
        rhs[row] = vb - va;
    }
    let x = gauss(a, rhs);
    let voltages: Vec<f64> = (0..nodes).map(|k| fixed[k].unwrap_or_else(|| x[index[k]])).collect();
    let mut sense = Vec::new();
    for (k, br) in branches.iter().enumerate() {
        if let Some(col) = br.sense {
            let i = if br.r == 0.0 {
                x[n + shorts.iter().position(|&s| s == k).unwrap()]
            } else {
                (voltages[br.a] - voltages[br.b]) / br.r
            };
            if sense.len() <= col {
                sense.resize(col + 1, 0.0);
            }
            sense[col] = i;
        }
    }
    Some(DenseSolution { voltages, sense })
}

fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        assert!(a[p][c].abs() > 0.0, "singular oracle matrix");
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}
