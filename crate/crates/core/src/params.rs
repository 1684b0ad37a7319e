//! Model constants and the `NAME = VALUE` parameter file format.
//!
//! Names are kept exactly as they appear in the published parameter table so
//! the table itself can be pasted into a file and loaded. The three derived
//! entries (`O_rest`, `P_rest`, `IO_alpha`) are formulas rather than numbers;
//! they are accepted in files and ignored.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub min_act: f64,
    pub max_act: f64,
    pub decay_rate: f64,
    pub min_rest: f64,
    pub max_rest: f64,
    /// Fixed normalizer for frequency-derived resting levels. `None` means the
    /// maximum over the loaded lexicon is used.
    pub max_opb: Option<f64>,
    pub i_rest: f64,
    pub s_rest: f64,
    pub l_rest: f64,
    pub io_multiplier: f64,
    pub ss_multiplier: f64,
    pub criterion_value: f64,
    pub shortlist_input_threshold: f64,
    pub shortlist_output_threshold: f64,
    pub timestep_multiplier: f64,
    pub timestep_adder: f64,

    pub op_alpha: f64,
    pub os_alpha: f64,
    pub po_alpha: f64,
    pub ps_alpha: f64,
    pub so_alpha: f64,
    pub sp_alpha: f64,
    pub lo_alpha: f64,
    pub lp_alpha: f64,
    pub ol_alpha: f64,
    pub pl_alpha: f64,

    pub oo_gamma: f64,
    pub pp_gamma: f64,
    pub ss_gamma: f64,
    pub ll_gamma: f64,
    pub lo_gamma: f64,
    pub lp_gamma: f64,
    pub ol_gamma: f64,
    pub pl_gamma: f64,

    pub max_cycles: u32,
}

impl Default for Parameters {
    fn default() -> Self {
        Self {
            min_act: -0.2,
            max_act: 1.0,
            decay_rate: 0.07,
            min_rest: -0.2,
            max_rest: 0.0,
            max_opb: None,
            i_rest: 1.0,
            s_rest: -0.2,
            l_rest: -0.2,
            io_multiplier: 0.2,
            ss_multiplier: 0.0,
            criterion_value: 0.72,
            shortlist_input_threshold: 0.7,
            shortlist_output_threshold: 0.5,
            timestep_multiplier: 1.0,
            timestep_adder: 0.0,
            op_alpha: 0.03,
            os_alpha: 0.03,
            po_alpha: 0.03,
            ps_alpha: 0.3,
            so_alpha: 0.03,
            sp_alpha: 0.3,
            lo_alpha: 0.0,
            lp_alpha: 0.0,
            ol_alpha: 0.0,
            pl_alpha: 0.0,
            oo_gamma: -0.001,
            pp_gamma: -0.001,
            ss_gamma: -0.5,
            ll_gamma: 0.0,
            lo_gamma: 0.0,
            lp_gamma: 0.0,
            ol_gamma: 0.0,
            pl_gamma: 0.0,
            max_cycles: 40,
        }
    }
}

/// Every settable parameter name, in table order.
pub const PARAMETER_NAMES: &[&str] = &[
    "MIN_ACT",
    "MAX_ACT",
    "DECAY_RATE",
    "MIN_REST",
    "MAX_REST",
    "MAX_OPB",
    "I_rest",
    "L_rest",
    "S_rest",
    "IO_multiplier",
    "SS_multiplier",
    "criterion_value",
    "shortlist_input_threshold",
    "shortlist_output_threshold",
    "timestep_multiplier",
    "timestep_adder",
    "OP_alpha",
    "OS_alpha",
    "PO_alpha",
    "PS_alpha",
    "SO_alpha",
    "SP_alpha",
    "LO_alpha",
    "LP_alpha",
    "OL_alpha",
    "PL_alpha",
    "OO_gamma",
    "PP_gamma",
    "SS_gamma",
    "LL_gamma",
    "LO_gamma",
    "LP_gamma",
    "OL_gamma",
    "PL_gamma",
    "max_cycles",
];

/// Table rows whose value is a formula; tolerated in files, never settable.
const DERIVED_NAMES: &[&str] = &["O_rest", "P_rest", "IO_alpha"];

impl Parameters {
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::Config(format!("{name}: value must be finite")));
        }
        let slot = match name {
            "MAX_OPB" => {
                if value <= 0.0 {
                    return Err(Error::Config("MAX_OPB must be positive".into()));
                }
                self.max_opb = Some(value);
                return Ok(());
            }
            "max_cycles" => {
                if value < 1.0 || value.fract() != 0.0 || value > u32::MAX as f64 {
                    return Err(Error::Config("max_cycles must be a positive integer".into()));
                }
                self.max_cycles = value as u32;
                return Ok(());
            }
            _ => self.slot_mut(name)?,
        };
        *slot = value;
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        match name {
            "MAX_OPB" => self.max_opb.ok_or_else(|| Error::Config("MAX_OPB is unset (lexicon maximum in use)".into())),
            "max_cycles" => Ok(self.max_cycles as f64),
            _ => {
                let mut copy = self.clone();
                Ok(*copy.slot_mut(name)?)
            }
        }
    }

    fn slot_mut(&mut self, name: &str) -> Result<&mut f64> {
        Ok(match name {
            "MIN_ACT" => &mut self.min_act,
            "MAX_ACT" => &mut self.max_act,
            "DECAY_RATE" => &mut self.decay_rate,
            "MIN_REST" => &mut self.min_rest,
            "MAX_REST" => &mut self.max_rest,
            "I_rest" => &mut self.i_rest,
            "L_rest" => &mut self.l_rest,
            "S_rest" => &mut self.s_rest,
            "IO_multiplier" => &mut self.io_multiplier,
            "SS_multiplier" => &mut self.ss_multiplier,
            "criterion_value" => &mut self.criterion_value,
            "shortlist_input_threshold" => &mut self.shortlist_input_threshold,
            "shortlist_output_threshold" => &mut self.shortlist_output_threshold,
            "timestep_multiplier" => &mut self.timestep_multiplier,
            "timestep_adder" => &mut self.timestep_adder,
            "OP_alpha" => &mut self.op_alpha,
            "OS_alpha" => &mut self.os_alpha,
            "PO_alpha" => &mut self.po_alpha,
            "PS_alpha" => &mut self.ps_alpha,
            "SO_alpha" => &mut self.so_alpha,
            "SP_alpha" => &mut self.sp_alpha,
            "LO_alpha" => &mut self.lo_alpha,
            "LP_alpha" => &mut self.lp_alpha,
            "OL_alpha" => &mut self.ol_alpha,
            "PL_alpha" => &mut self.pl_alpha,
            "OO_gamma" => &mut self.oo_gamma,
            "PP_gamma" => &mut self.pp_gamma,
            "SS_gamma" => &mut self.ss_gamma,
            "LL_gamma" => &mut self.ll_gamma,
            "LO_gamma" => &mut self.lo_gamma,
            "LP_gamma" => &mut self.lp_gamma,
            "OL_gamma" => &mut self.ol_gamma,
            "PL_gamma" => &mut self.pl_gamma,
            _ => return Err(unknown_name(name)),
        })
    }

    /// Applies a single `NAME=VALUE` override.
    pub fn apply_assignment(&mut self, assignment: &str) -> Result<()> {
        let (name, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected NAME=VALUE, got {assignment:?}")))?;
        let name = name.trim();
        if DERIVED_NAMES.contains(&name) {
            return Err(Error::Config(format!("{name} is derived and cannot be set")));
        }
        let value = parse_value(name, value.trim())?;
        self.set(name, value)
    }

    /// Overlays the assignments of a parameter file onto `self`.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let wrap = |e: Error| Error::Parse { line: idx + 1, message: e.to_string() };
            let (name, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: format!("expected `NAME = VALUE`, got {line:?}"),
            })?;
            let name = name.trim();
            if DERIVED_NAMES.contains(&name) {
                continue;
            }
            let value = parse_value(name, value.trim()).map_err(wrap)?;
            self.set(name, value).map_err(wrap)?;
        }
        Ok(())
    }

    pub fn from_file_text(text: &str) -> Result<Self> {
        let mut params = Self::default();
        params.apply_file(text)?;
        params.validate()?;
        Ok(params)
    }

    /// Renders every parameter as a loadable file, in table order.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for name in PARAMETER_NAMES {
            match self.get(name) {
                Ok(v) => {
                    let _ = writeln!(out, "{name} = {v}");
                }
                Err(_) => {
                    let _ = writeln!(out, "# {name} unset");
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.min_act <= self.max_rest && self.max_rest <= self.max_act) {
            return bad("require MIN_ACT <= MAX_REST <= MAX_ACT".into());
        }
        if self.min_rest > self.max_rest {
            return bad("require MIN_REST <= MAX_REST".into());
        }
        if self.min_rest < self.min_act {
            return bad("require MIN_ACT <= MIN_REST".into());
        }
        for (name, rest) in [("S_rest", self.s_rest), ("L_rest", self.l_rest)] {
            if rest < self.min_act || rest > self.max_rest {
                return bad(format!("{name} must lie in [MIN_ACT, MAX_REST]"));
            }
        }
        for (name, g) in [
            ("OO_gamma", self.oo_gamma),
            ("PP_gamma", self.pp_gamma),
            ("SS_gamma", self.ss_gamma),
            ("LL_gamma", self.ll_gamma),
            ("LO_gamma", self.lo_gamma),
            ("LP_gamma", self.lp_gamma),
            ("OL_gamma", self.ol_gamma),
            ("PL_gamma", self.pl_gamma),
        ] {
            if g > 0.0 {
                return bad(format!("{name} must be <= 0"));
            }
        }
        if self.max_cycles < 1 {
            return bad("max_cycles must be >= 1".into());
        }
        if self.decay_rate < 0.0 {
            return bad("DECAY_RATE must be >= 0".into());
        }
        Ok(())
    }

    /// Linear cycles-to-milliseconds mapping used in reports.
    pub fn predicted_rt(&self, cycles: u32) -> f64 {
        cycles as f64 * self.timestep_multiplier + self.timestep_adder
    }

    /// Sets the orthographic and phonological inhibition together.
    pub fn with_inhibition(mut self, gamma: f64) -> Self {
        self.oo_gamma = gamma;
        self.pp_gamma = gamma;
        self
    }
}

fn parse_value(name: &str, raw: &str) -> Result<f64> {
    raw.parse::<f64>().map_err(|_| Error::Config(format!("{name}: {raw:?} is not a number")))
}

fn unknown_name(name: &str) -> Error {
    Error::Config(format!("unknown parameter {name:?}; valid names: {}", PARAMETER_NAMES.join(", ")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE: &str = include_str!("../../../fixtures/published.params");

    #[test]
    fn published_table_is_a_valid_file() {
        let p = Parameters::from_file_text(TABLE).unwrap();
        let expected = Parameters { max_opb: Some(0.6402259325203161), ..Parameters::default() };
        assert_eq!(p, expected);
    }

    #[test]
    fn set_overrides_file() {
        let mut p = Parameters::from_file_text("OO_gamma = -0.5\n").unwrap();
        assert_eq!(p.oo_gamma, -0.5);
        p.apply_assignment("OO_gamma=-0.0001").unwrap();
        assert_eq!(p.oo_gamma, -0.0001);
    }

    #[test]
    fn unknown_name_lists_valid_names() {
        let err = Parameters::default().apply_assignment("OO_gama=-1").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("OO_gama"));
        for name in PARAMETER_NAMES {
            assert!(msg.contains(name), "missing {name}");
        }
    }

    #[test]
    fn positive_gamma_rejected() {
        let err = Parameters::from_file_text("PP_gamma = 0.1").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn file_errors_carry_line_numbers() {
        let err = Parameters::from_file_text("# header\nOO_gamma = abc\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn file_rendering_round_trips() {
        let mut p = Parameters::default().with_inhibition(-0.0001);
        p.max_cycles = 55;
        let back = Parameters::from_file_text(&p.to_file_string()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn derived_names_cannot_be_set_directly() {
        assert!(Parameters::default().apply_assignment("O_rest=0.1").is_err());
    }
}
