//! Named closed-form calculators behind `lrhist bounds`.

use std::collections::BTreeMap;

use clap::Args;
use lowrank_hist::{bounds, lipschitz, scheffe};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CALCULATORS: &[(&str, &str)] = &[
    ("m_L", "--L"),
    ("M", "--U --L"),
    ("exact-l1", "--L --b"),
    ("separable-bias", "--L --b --d"),
    ("l2projbnd", "--L --b --d"),
    ("multiview-finite", "--n --b --d --k --delta"),
    ("tucker-finite", "--n --b --d --k --delta"),
    ("multiview-class", "--n --d --k --L --delta"),
    ("tucker-class", "--n --d --k --L --delta"),
    ("core-term", "--n --d --k"),
    ("scheffe-n", "--candidates --eps --delta"),
];

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Calculator name; see `lrhist bounds list`.
    pub name: String,
    #[arg(long = "L", allow_negative_numbers = true)]
    pub l: Option<f64>,
    #[arg(long = "U", allow_negative_numbers = true)]
    pub u: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub d: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub k: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub n: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eps: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub candidates: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsOutput {
    pub calculator: String,
    pub params: BTreeMap<String, f64>,
    pub value: f64,
    /// Secondary quantities, e.g. the two branches of a piecewise bound.
    pub terms: BTreeMap<String, Option<f64>>,
}

impl BoundsOutput {
    pub fn to_text(&self) -> String {
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let mut out = format!("{}({}) = {}\n", self.calculator, params.join(", "), self.value);
        for (k, v) in &self.terms {
            match v {
                Some(v) => out.push_str(&format!("  {k} = {v}\n")),
                None => out.push_str(&format!("  {k} = n/a\n")),
            }
        }
        out
    }
}

pub fn available() -> String {
    CALCULATORS.iter().map(|(n, p)| format!("  {n:<18} {p}")).collect::<Vec<_>>().join("\n")
}

struct Params<'a> {
    args: &'a BoundsArgs,
    used: BTreeMap<String, f64>,
}

impl Params<'_> {
    fn get(&mut self, flag: &str) -> Result<f64, CliError> {
        let a = self.args;
        let v = match flag {
            "L" => a.l,
            "U" => a.u,
            "b" => a.b,
            "d" => a.d,
            "k" => a.k,
            "n" => a.n,
            "delta" => a.delta,
            "eps" => a.eps,
            "candidates" => a.candidates,
            _ => unreachable!("unknown flag {flag}"),
        };
        let v = v.ok_or_else(|| CliError::Usage(format!("{} needs --{flag}", a.name)))?;
        self.used.insert(flag.to_string(), v);
        Ok(v)
    }

    fn count(&mut self, flag: &str) -> Result<usize, CliError> {
        let v = self.get(flag)?;
        if v < 1.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            return Err(CliError::Usage(format!("--{flag} must be a positive integer, got {v}")));
        }
        Ok(v as usize)
    }
}

fn branches(small: Option<f64>, large: Option<f64>) -> BTreeMap<String, Option<f64>> {
    BTreeMap::from([("small_l".to_string(), small), ("large_l".to_string(), large)])
}

pub fn run(args: &BoundsArgs) -> Result<BoundsOutput, CliError> {
    let mut p = Params { args, used: BTreeMap::new() };
    let mut terms = BTreeMap::new();
    let value = match args.name.as_str() {
        "m_L" => {
            let m = lipschitz::m_l(p.get("L")?)?;
            terms.insert("m".to_string(), Some(m.m));
            m.m_sq
        }
        "M" => lipschitz::m_value(p.get("U")?, p.get("L")?)?,
        "exact-l1" => lipschitz::exact_l1_hist_error(p.get("L")?, p.count("b")?)?,
        "separable-bias" => {
            let s = lipschitz::separable_l2_bias_bound(p.get("L")?, p.count("b")?, p.count("d")?)?;
            terms.insert("l1".to_string(), Some(s.l1));
            s.l2_sq
        }
        "l2projbnd" => {
            let r = lipschitz::l2projbnd(p.get("L")?, p.count("b")?, p.count("d")?)?;
            terms = branches(r.small_l, r.large_l);
            r.value
        }
        "multiview-finite" => {
            bounds::multiview_finite(p.get("n")?, p.get("b")?, p.get("d")?, p.get("k")?, p.get("delta")?)?
        }
        "tucker-finite" => {
            bounds::tucker_finite(p.get("n")?, p.get("b")?, p.get("d")?, p.get("k")?, p.get("delta")?)?
        }
        "multiview-class" | "tucker-class" => {
            let f = if args.name == "tucker-class" { bounds::tucker_class } else { bounds::multiview_class };
            let r = f(p.get("n")?, p.get("d")?, p.get("k")?, p.get("L")?, p.get("delta")?)?;
            terms = branches(r.small_l, r.large_l);
            r.value
        }
        "core-term" => {
            let (n, d, k) = (p.count("n")?, p.count("d")?, p.count("k")?);
            bounds::core_term(n as f64, d as f64, k as f64)
        }
        "scheffe-n" => scheffe::scheffe_sample_size(p.count("candidates")?, p.get("eps")?, p.get("delta")?)? as f64,
        other => {
            return Err(CliError::Usage(format!(
                "unknown calculator '{other}', available:\n{}",
                available()
            )))
        }
    };
    Ok(BoundsOutput { calculator: args.name.clone(), params: p.used, value, terms })
}
