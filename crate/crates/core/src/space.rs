use crate::error::{ensure, ensure_len, Error, Result};

/// Per-dimension label set `{0..=max_label}` repeated over `dims` dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    max_label: u32,
    dims: usize,
}

impl StateSpace {
    pub fn new(max_label: u32, dims: usize) -> Result<Self> {
        ensure(max_label >= 1, "max label M must be at least 1")?;
        ensure(dims >= 1, "dimension count N must be at least 1")?;
        Ok(Self { max_label, dims })
    }

    #[inline]
    pub fn max_label(&self) -> u32 {
        self.max_label
    }

    #[inline]
    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Number of labels per dimension, `M + 1`.
    #[inline]
    pub fn labels(&self) -> usize {
        self.max_label as usize + 1
    }

    #[inline]
    pub fn check_label(&self, m: u32) -> Result<()> {
        ensure(m <= self.max_label, "state label exceeds M")
    }

    pub fn check_state(&self, x: &[u32]) -> Result<()> {
        ensure_len(self.dims, x.len())?;
        if x.iter().any(|&m| m > self.max_label) {
            return Err(Error::Domain("state component exceeds M"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_spaces() {
        assert!(StateSpace::new(0, 3).is_err());
        assert!(StateSpace::new(4, 0).is_err());
        let s = StateSpace::new(4, 2).unwrap();
        assert!(s.check_state(&[4, 0]).is_ok());
        assert!(s.check_state(&[5, 0]).is_err());
        assert_eq!(s.check_state(&[1]), Err(Error::Shape { expected: 2, got: 1 }));
    }
}
