//! Shared helpers for CSV and JSON artifacts.

use std::fmt::Write as _;

use crate::model::EmitterParams;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `# key: value` comment lines that open every CSV artifact.
#[derive(Debug, Clone, Default)]
pub struct Provenance {
    lines: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(artifact: &str) -> Self {
        let mut p = Provenance::default();
        p.push("artifact", artifact);
        p.push("generator", format!("flyqubit {VERSION}"));
        p
    }

    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.lines.push((key.to_string(), value.to_string()));
        self
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.push(key, value);
        self
    }

    pub fn with_params(self, p: &EmitterParams) -> Self {
        self.with("params_rad_per_ns", params_summary(p))
    }

    pub fn header(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.lines {
            let _ = writeln!(s, "# {k}: {v}");
        }
        s
    }

    /// Header followed by `body`.
    pub fn wrap(&self, body: &str) -> String {
        let mut s = self.header();
        s.push_str(body);
        s
    }
}

pub fn params_summary(p: &EmitterParams) -> String {
    format!(
        "g={:.12e} kappa={:.12e} kappa_tilde={:.12e} gamma_tilde={:.12e} Gamma1={:.12e} Gamma2={:.12e} Delta={:.12e}",
        p.g, p.kappa, p.kappa_tilde, p.gamma_tilde, p.gamma1, p.gamma2, p.delta
    )
}

/// Strips `#` comment lines, for comparing CSV bodies.
pub fn csv_body(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_deterministic() {
        let a = Provenance::new("x").with("T_ns", 0.44).header();
        let b = Provenance::new("x").with("T_ns", 0.44).header();
        assert_eq!(a, b);
        assert!(a.starts_with("# artifact: x\n# generator: flyqubit "));
        assert_eq!(csv_body(&Provenance::new("y").wrap("a,b\n1,2\n")), "a,b\n1,2\n");
    }
}
