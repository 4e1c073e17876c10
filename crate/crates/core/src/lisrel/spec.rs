use serde::{Deserialize, Serialize};

use super::template::{Cell, MatrixTemplate, ParamBounds};
use crate::error::{Error, Result};
use crate::matstat::half_len;

/// The eight structural matrices of a LISREL model, as templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Templates {
    /// Λ_x1, p1 x k1.
    pub lambda_x1: MatrixTemplate,
    /// Λ_x2, p2 x k2.
    pub lambda_x2: MatrixTemplate,
    /// B₀, k2 x k2 with zero diagonal.
    pub b0: MatrixTemplate,
    /// Γ, k2 x k1.
    pub gamma: MatrixTemplate,
    pub sigma_xixi: MatrixTemplate,
    pub sigma_dd: MatrixTemplate,
    pub sigma_ee: MatrixTemplate,
    pub sigma_zz: MatrixTemplate,
}

impl Templates {
    /// All-zero templates of the right shapes; variance blocks are symmetric.
    pub fn zeros(p1: usize, p2: usize, k1: usize, k2: usize) -> Self {
        Self {
            lambda_x1: MatrixTemplate::zeros(p1, k1),
            lambda_x2: MatrixTemplate::zeros(p2, k2),
            b0: MatrixTemplate::zeros(k2, k2),
            gamma: MatrixTemplate::zeros(k2, k1),
            sigma_xixi: MatrixTemplate::symmetric_zeros(k1),
            sigma_dd: MatrixTemplate::symmetric_zeros(p1),
            sigma_ee: MatrixTemplate::symmetric_zeros(p2),
            sigma_zz: MatrixTemplate::symmetric_zeros(k2),
        }
    }

    pub(crate) fn iter(&self) -> [(&'static str, &MatrixTemplate); 8] {
        [
            ("lambda_x1", &self.lambda_x1),
            ("lambda_x2", &self.lambda_x2),
            ("b0", &self.b0),
            ("gamma", &self.gamma),
            ("sigma_xixi", &self.sigma_xixi),
            ("sigma_dd", &self.sigma_dd),
            ("sigma_ee", &self.sigma_ee),
            ("sigma_zz", &self.sigma_zz),
        ]
    }

    fn map(&self, f: impl Fn(&MatrixTemplate) -> MatrixTemplate) -> Self {
        Self {
            lambda_x1: f(&self.lambda_x1),
            lambda_x2: f(&self.lambda_x2),
            b0: f(&self.b0),
            gamma: f(&self.gamma),
            sigma_xixi: f(&self.sigma_xixi),
            sigma_dd: f(&self.sigma_dd),
            sigma_ee: f(&self.sigma_ee),
            sigma_zz: f(&self.sigma_zz),
        }
    }
}

/// A validated LISREL model: templates, parameter names and the box Θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    p1: usize,
    p2: usize,
    k1: usize,
    k2: usize,
    templates: Templates,
    names: Vec<String>,
    bounds: Vec<ParamBounds>,
}

impl ModelSpec {
    pub fn new(templates: Templates, names: Vec<String>, bounds: Vec<ParamBounds>) -> Result<Self> {
        let t = &templates;
        let p1 = t.lambda_x1.rows();
        let k1 = t.lambda_x1.cols();
        let p2 = t.lambda_x2.rows();
        let k2 = t.lambda_x2.cols();
        if p1 == 0 {
            return Err(Error::InvalidModel("p1 must be at least 1".into()));
        }
        if k1 > p1 || k2 > p2 {
            return Err(Error::InvalidModel(format!(
                "need k1 <= p1 and k2 <= p2, got k1={k1}, p1={p1}, k2={k2}, p2={p2}"
            )));
        }
        let shapes = [
            ("b0", &t.b0, k2, k2),
            ("gamma", &t.gamma, k2, k1),
            ("sigma_xixi", &t.sigma_xixi, k1, k1),
            ("sigma_dd", &t.sigma_dd, p1, p1),
            ("sigma_ee", &t.sigma_ee, p2, p2),
            ("sigma_zz", &t.sigma_zz, k2, k2),
        ];
        for (name, tpl, r, c) in shapes {
            if tpl.rows() != r || tpl.cols() != c {
                return Err(Error::InvalidModel(format!(
                    "{name} must be {r}x{c}, got {}x{}",
                    tpl.rows(),
                    tpl.cols()
                )));
            }
        }
        for (name, tpl) in [
            ("sigma_xixi", &t.sigma_xixi),
            ("sigma_dd", &t.sigma_dd),
            ("sigma_ee", &t.sigma_ee),
            ("sigma_zz", &t.sigma_zz),
        ] {
            if !tpl.is_symmetric() {
                return Err(Error::InvalidModel(format!("{name} must be a symmetric template")));
            }
        }
        for i in 0..k2 {
            if t.b0.cell(i, i) != Cell::Fixed(0.0) {
                return Err(Error::InvalidModel("diagonal of b0 must be fixed at 0".into()));
            }
        }

        let q = names.len();
        if bounds.len() != q {
            return Err(Error::InvalidModel(format!(
                "{} parameter names but {} bounds",
                q,
                bounds.len()
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::InvalidModel(format!("duplicate parameter name `{n}`")));
            }
        }
        let mut used = vec![false; q];
        for (name, tpl) in t.iter() {
            for k in tpl.params() {
                if k >= q {
                    return Err(Error::InvalidModel(format!(
                        "{name} references parameter {k} but q = {q}"
                    )));
                }
                used[k] = true;
            }
        }
        if let Some(k) = used.iter().position(|u| !u) {
            return Err(Error::InvalidModel(format!(
                "parameter `{}` does not appear in any matrix",
                names[k]
            )));
        }
        let p = p1 + p2;
        if q > half_len(p) {
            return Err(Error::InvalidModel(format!(
                "q = {q} exceeds p(p+1)/2 = {}",
                half_len(p)
            )));
        }
        Ok(Self {
            p1,
            p2,
            k1,
            k2,
            templates,
            names,
            bounds,
        })
    }

    pub fn p1(&self) -> usize {
        self.p1
    }

    pub fn p2(&self) -> usize {
        self.p2
    }

    pub fn k1(&self) -> usize {
        self.k1
    }

    pub fn k2(&self) -> usize {
        self.k2
    }

    /// Observed dimension p = p1 + p2.
    pub fn p(&self) -> usize {
        self.p1 + self.p2
    }

    pub fn pbar(&self) -> usize {
        half_len(self.p())
    }

    /// Number of free parameters.
    pub fn q(&self) -> usize {
        self.names.len()
    }

    /// Goodness-of-fit degrees of freedom p̄ − q.
    pub fn df(&self) -> i64 {
        self.pbar() as i64 - self.q() as i64
    }

    pub fn templates(&self) -> &Templates {
        &self.templates
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn bounds(&self) -> &[ParamBounds] {
        &self.bounds
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.q() && self.bounds.iter().zip(theta).all(|(b, &x)| b.contains(x))
    }

    /// Same model with every cell referencing `param` scaled by `factor`.
    pub fn rescale_param(&self, param: usize, factor: f64) -> Self {
        Self {
            templates: self.templates.map(|t| t.rescale_param(param, factor)),
            ..self.clone()
        }
    }

    /// Relabels observed variables: `perm1` permutes X1, `perm2` permutes X2.
    pub fn permute_observed(&self, perm1: &[usize], perm2: &[usize]) -> Result<Self> {
        check_perm(perm1, self.p1)?;
        check_perm(perm2, self.p2)?;
        let mut out = self.clone();
        out.templates.lambda_x1 = self.templates.lambda_x1.permute_rows(perm1);
        out.templates.sigma_dd = self.templates.sigma_dd.permute_rows(perm1);
        out.templates.lambda_x2 = self.templates.lambda_x2.permute_rows(perm2);
        out.templates.sigma_ee = self.templates.sigma_ee.permute_rows(perm2);
        Ok(out)
    }
}

fn check_perm(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
        return Err(Error::InvalidDimension(format!("not a permutation of 0..{n}")));
    }
    Ok(())
}

/// A parameter vector θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Theta(pub Vec<f64>);

impl Theta {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Deref for Theta {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Theta {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}
