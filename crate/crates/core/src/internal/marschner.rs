use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BinaryAuxEstimate {
    pub p_y: f64,
    pub p_z: f64,
    pub p_y_given_z: f64,
    pub p_y_given_not_z: f64,
    pub rho_sq: f64,
    pub pi: f64,
    pub variance: f64,
    pub m: usize,
    pub m_z: usize,
}

/// Maximum likelihood estimate of pr(Y = 1) when the binary intermediate `z`
/// is seen for all `m_Z` subjects and `y` for the first `m` of them.
pub fn marschner_binary(y: &[bool], z: &[bool]) -> Result<BinaryAuxEstimate> {
    let (m, m_z) = (y.len(), z.len());
    if m == 0 || m > m_z {
        return Err(Error::domain(format!(
            "need 0 < m <= m_Z, got m = {m}, m_Z = {m_z}"
        )));
    }
    let p_z = z.iter().filter(|&&v| v).count() as f64 / m_z as f64;
    let (mut n1, mut s1, mut n0, mut s0) = (0usize, 0usize, 0usize, 0usize);
    for (&yi, &zi) in y.iter().zip(z) {
        if zi {
            n1 += 1;
            s1 += usize::from(yi);
        } else {
            n0 += 1;
            s0 += usize::from(yi);
        }
    }
    if n1 == 0 {
        return Err(Error::EmptyStratum("Z = 1"));
    }
    if n0 == 0 {
        return Err(Error::EmptyStratum("Z = 0"));
    }
    let p_y_given_z = s1 as f64 / n1 as f64;
    let p_y_given_not_z = s0 as f64 / n0 as f64;
    let p_y = p_z * p_y_given_z + (1.0 - p_z) * p_y_given_not_z;
    let py_var = p_y * (1.0 - p_y);
    let rho_sq = if py_var > 0.0 {
        ((p_y_given_z - p_y).powi(2) * p_z / (py_var * (1.0 - p_z))).min(1.0)
    } else {
        0.0
    };
    let pi = m as f64 / m_z as f64;
    Ok(BinaryAuxEstimate {
        p_y,
        p_z,
        p_y_given_z,
        p_y_given_not_z,
        rho_sq,
        pi,
        variance: (1.0 - rho_sq * (1.0 - pi)) * py_var / m as f64,
        m,
        m_z,
    })
}
