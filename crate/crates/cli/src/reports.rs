use serde::{Deserialize, Serialize};
use subrad_core::constants::ConstantsReport;
use subrad_core::perturbations::PerturbationSpec;
use subrad_core::radii::RadiusReport;
use subrad_core::serde_ext::ext_f64;
use subrad_core::verify::SuiteOutcome;
use subrad_core::NormSpec;

use crate::output::{num, opt, Report};

impl Report for ConstantsReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["quantity", "value"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let mut rows: Vec<Vec<String>> = [
            ("rg", num(self.rg)),
            ("rg_over", num(self.rg_over)),
            ("rg_diamond", num(self.rg_diamond)),
            ("rg_dagger", opt(self.rg_dagger)),
            ("rg_circ_lower", num(self.rg_circ_lower)),
            ("rg_circ_upper", num(self.rg_circ_upper)),
            ("mr_bound", num(self.mr_bound)),
            ("ssr_bound", num(self.ssr_bound)),
        ]
        .into_iter()
        .map(|(k, v)| vec![k.to_string(), v])
        .collect();
        rows.push(vec!["norm".into(), self.norm.to_string()]);
        rows.push(vec!["pieces".into(), self.pieces.to_string()]);
        rows.push(vec!["method".into(), self.method.clone()]);
        rows
    }
}

impl Report for RadiusReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["bound", "value", "lower", "upper", "source"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let i = &self.rad_ss_interval;
        let mut rows = vec![
            vec!["rad_lip_lower".into(), num(self.rad_lip_lower.value), String::new(), String::new(), self.rad_lip_lower.source.clone()],
            vec!["rad_lip_upper".into(), num(self.rad_lip_upper.value), String::new(), String::new(), self.rad_lip_upper.source.clone()],
            vec!["rad_ss".into(), num(self.rad_ss.value), num(i.lower), num(i.upper), self.rad_ss.source.clone()],
            vec!["rad_c1".into(), num(self.rad_c1.value), num(i.lower), num(i.upper), self.rad_c1.source.clone()],
        ];
        if let Some(f) = &self.frobenius_bracket {
            rows.push(vec!["frobenius_bracket".into(), String::new(), num(f.lower), num(f.upper), "rg_dagger".into()]);
        }
        rows
    }
}

impl Report for SuiteOutcome {
    fn header(&self) -> Vec<&'static str> {
        vec!["suite", "seed", "trials", "passed", "failed", "max_error", "counterexample"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let ce = self.counterexample.as_ref().map(|c| format!("trial {}: {}", c.trial, c.reason)).unwrap_or_default();
        vec![vec![
            self.suite.clone(),
            self.seed.to_string(),
            self.trials.to_string(),
            self.passed.to_string(),
            self.failed.to_string(),
            num(self.max_error),
            ce,
        ]]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleRow {
    pub quantity: String,
    /// `"≈"` for agreement within `tolerance`, `">="` for a lower bound.
    pub relation: String,
    #[serde(with = "ext_f64")]
    pub expected: f64,
    #[serde(with = "ext_f64")]
    pub computed: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ExampleRow {
    pub fn approx(quantity: &str, expected: f64, computed: f64, tolerance: f64) -> Self {
        let pass = (computed - expected).abs() <= tolerance || (computed == expected);
        ExampleRow { quantity: quantity.into(), relation: "≈".into(), expected, computed, tolerance, pass }
    }

    pub fn at_least(quantity: &str, expected: f64, computed: f64) -> Self {
        ExampleRow { quantity: quantity.into(), relation: ">=".into(), expected, computed, tolerance: 0.0, pass: computed >= expected }
    }
}

/// Sampled subregularity ratios at shrinking radii around one base point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRow {
    pub label: String,
    pub base_point: f64,
    #[serde(with = "ext_f64::vec")]
    pub radii: Vec<f64>,
    #[serde(with = "ext_f64::vec")]
    pub ratios: Vec<f64>,
    /// Smallest ratio between consecutive decades.
    #[serde(with = "ext_f64")]
    pub min_growth: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleReport {
    pub example: String,
    pub norm: NormSpec,
    pub rows: Vec<ExampleRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub divergence: Vec<DivergenceRow>,
    pub passed: bool,
}

impl Report for ExampleReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["quantity", "relation", "expected", "computed", "tolerance", "pass"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let mut rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| vec![r.quantity.clone(), r.relation.clone(), num(r.expected), num(r.computed), num(r.tolerance), r.pass.to_string()])
            .collect();
        for d in &self.divergence {
            for (r, q) in d.radii.iter().zip(&d.ratios) {
                rows.push(vec![format!("subreg_ratio {} r={}", d.label, num(*r)), String::new(), String::new(), num(*q), String::new(), String::new()]);
            }
            rows.push(vec![format!("min_growth {}", d.label), ">=".into(), "5".into(), num(d.min_growth), "0".into(), d.pass.to_string()]);
        }
        rows
    }
}

impl ExampleReport {
    pub fn table(&self) -> String {
        let mut s = format!("example {} (p = {})\n", self.example, self.norm);
        s += &format!("{:<28} {:>3} {:>14} {:>14} {:>10}  {}\n", "quantity", "", "expected", "computed", "tolerance", "status");
        for r in &self.rows {
            s += &format!(
                "{:<28} {:>3} {:>14.8} {:>14.8} {:>10.1e}  {}\n",
                r.quantity,
                r.relation,
                r.expected,
                r.computed,
                r.tolerance,
                if r.pass { "ok" } else { "FAIL" }
            );
        }
        if !self.divergence.is_empty() {
            s += "\nsubregularity ratio at shrinking radius r\n";
            let radii_hdr: Vec<String> = (0..self.divergence[0].radii.len()).map(|d| format!("r/10^{d}")).collect();
            s += &format!("{:<12} {:>12} {}  {:>10}\n", "point", "x̄", radii_hdr.iter().map(|h| format!("{h:>12}")).collect::<String>(), "growth");
            for d in &self.divergence {
                let ratios: String = d.ratios.iter().map(|q| format!("{q:>12.4e}")).collect();
                s += &format!("{:<12} {:>12.4e} {}  {:>10.2}  {}\n", d.label, d.base_point, ratios, d.min_growth, if d.pass { "ok" } else { "FAIL" });
            }
        }
        s += if self.passed { "all checks passed\n" } else { "some checks FAILED\n" };
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbCheckReport {
    pub perturbation: PerturbationSpec,
    #[serde(with = "ext_f64::option")]
    pub declared_modulus: Option<f64>,
    #[serde(with = "ext_f64::option")]
    pub lip_estimate: Option<f64>,
    pub modulus_ok: bool,
    #[serde(with = "ext_f64::vec")]
    pub radii: Vec<f64>,
    #[serde(with = "ext_f64::vec")]
    pub ratios_unperturbed: Vec<f64>,
    #[serde(with = "ext_f64::vec")]
    pub ratios_perturbed: Vec<f64>,
    /// Smallest growth of the perturbed ratio per decade of shrinking radius.
    #[serde(with = "ext_f64")]
    pub min_growth: f64,
    /// Growth of at least 5 in every decade.
    pub diverges: bool,
}

impl Report for PerturbCheckReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["radius", "ratio_unperturbed", "ratio_perturbed"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.radii
            .iter()
            .zip(&self.ratios_unperturbed)
            .zip(&self.ratios_perturbed)
            .map(|((r, a), b)| vec![num(*r), num(*a), num(*b)])
            .collect()
    }
}
