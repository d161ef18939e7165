use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Arch {
    Lstm,
    Gru,
    Mgu,
}

impl Arch {
    pub const ALL: [Arch; 3] = [Arch::Lstm, Arch::Gru, Arch::Mgu];

    /// Sigmoid gates of the architecture, in parameter order.
    pub fn gates(self) -> &'static [Gate] {
        match self {
            Arch::Lstm => &[Gate::Forget, Gate::Input, Gate::Output],
            Arch::Gru => &[Gate::Update, Gate::Reset],
            Arch::Mgu => &[Gate::Forget],
        }
    }

    /// Gates that may be refined without the unsafe override.
    pub fn safe_refinable(self) -> &'static [Gate] {
        match self {
            Arch::Lstm => &[Gate::Input, Gate::Output],
            Arch::Gru => &[Gate::Reset],
            Arch::Mgu => &[Gate::Forget],
        }
    }

    pub fn gate_index(self, gate: Gate) -> Option<usize> {
        self.gates().iter().position(|&g| g == gate)
    }

    pub fn has_memory_cell(self) -> bool {
        matches!(self, Arch::Lstm)
    }

    pub fn name(self) -> &'static str {
        match self {
            Arch::Lstm => "lstm",
            Arch::Gru => "gru",
            Arch::Mgu => "mgu",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lstm" => Ok(Arch::Lstm),
            "gru" => Ok(Arch::Gru),
            "mgu" => Ok(Arch::Mgu),
            other => Err(Error::Config(format!(
                "unknown architecture `{other}` (expected lstm, gru or mgu)"
            ))),
        }
    }
}

/// How a sigmoid gate output is combined with the cell input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum RefineMode {
    #[default]
    None,
    Add,
    Mul,
}

impl RefineMode {
    pub fn name(self) -> &'static str {
        match self {
            RefineMode::None => "none",
            RefineMode::Add => "add",
            RefineMode::Mul => "mul",
        }
    }
}

impl fmt::Display for RefineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RefineMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "vanilla" => Ok(RefineMode::None),
            "add" | "+" => Ok(RefineMode::Add),
            "mul" | "x" | "*" => Ok(RefineMode::Mul),
            other => Err(Error::Config(format!(
                "unknown refine mode `{other}` (expected none, add or mul)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gate {
    Forget,
    Input,
    Output,
    Update,
    Reset,
}

impl Gate {
    pub const ALL: [Gate; 5] = [
        Gate::Forget,
        Gate::Input,
        Gate::Output,
        Gate::Update,
        Gate::Reset,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Gate::Forget => "forget",
            Gate::Input => "input",
            Gate::Output => "output",
            Gate::Update => "update",
            Gate::Reset => "reset",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Gate {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "forget" | "f" => Ok(Gate::Forget),
            "input" | "i" => Ok(Gate::Input),
            "output" | "o" => Ok(Gate::Output),
            "update" | "z" => Ok(Gate::Update),
            "reset" | "r" => Ok(Gate::Reset),
            other => Err(Error::Config(format!("unknown gate `{other}`"))),
        }
    }
}

/// Set of refined gates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct GateSelect(u8);

impl GateSelect {
    pub const EMPTY: GateSelect = GateSelect(0);

    pub fn of(gates: &[Gate]) -> Self {
        GateSelect(gates.iter().fold(0, |m, g| m | g.bit()))
    }

    pub fn contains(self, gate: Gate) -> bool {
        self.0 & gate.bit() != 0
    }

    pub fn insert(&mut self, gate: Gate) {
        self.0 |= gate.bit();
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Gate> {
        Gate::ALL.into_iter().filter(move |g| self.contains(*g))
    }
}

impl fmt::Display for GateSelect {
    /// Comma-separated gate names, or `-` for the empty set.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("-");
        }
        let names: Vec<&str> = self.iter().map(Gate::name).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for GateSelect {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "-" || s.eq_ignore_ascii_case("none") {
            return Ok(GateSelect::EMPTY);
        }
        let mut sel = GateSelect::EMPTY;
        for part in s.split(',') {
            sel.insert(part.trim().parse()?);
        }
        Ok(sel)
    }
}

/// Architecture and refinement choice for one recurrent cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CellConfig {
    pub arch: Arch,
    pub input_size: usize,
    pub hidden_size: usize,
    pub refine_mode: RefineMode,
    pub refined_gates: GateSelect,
    /// Permits refining the LSTM forget gate. Only the gradient-explosion
    /// demonstration sets this.
    pub unsafe_allow_forget_refine: bool,
    /// Insert a learned affine map `W_in·x + b_in` in front of the cell.
    /// Mandatory when a refined cell has `input_size != hidden_size`.
    pub project_input: bool,
    /// Initialize the LSTM forget-gate bias to +1 instead of 0.
    pub unit_forget_bias: bool,
    /// Request refinement inside the state interpolation itself. Never legal;
    /// kept so such requests can be rejected explicitly.
    pub refine_state_update: bool,
}

impl CellConfig {
    /// Vanilla cell; the input projection is enabled iff the sizes differ.
    pub fn new(arch: Arch, input_size: usize, hidden_size: usize) -> Self {
        CellConfig {
            arch,
            input_size,
            hidden_size,
            refine_mode: RefineMode::None,
            refined_gates: GateSelect::EMPTY,
            unsafe_allow_forget_refine: false,
            project_input: input_size != hidden_size,
            unit_forget_bias: false,
            refine_state_update: false,
        }
    }

    pub fn refined(mut self, mode: RefineMode, gates: &[Gate]) -> Self {
        self.refine_mode = mode;
        self.refined_gates = GateSelect::of(gates);
        self
    }

    pub fn with_projection(mut self, on: bool) -> Self {
        self.project_input = on;
        self
    }

    /// Dimension of `x_t` inside the cell (after the optional projection).
    pub fn cell_input_size(&self) -> usize {
        if self.project_input {
            self.hidden_size
        } else {
            self.input_size
        }
    }

    /// Effective refine mode of one gate.
    pub fn mode_of(&self, gate: Gate) -> RefineMode {
        if self.refined_gates.contains(gate) {
            self.refine_mode
        } else {
            RefineMode::None
        }
    }

    /// Short label such as `lstm-ro(add)`.
    pub fn label(&self) -> String {
        if self.refine_mode == RefineMode::None || self.refined_gates.is_empty() {
            return self.arch.name().to_string();
        }
        let suffix: String = self
            .refined_gates
            .iter()
            .map(|g| match g {
                Gate::Forget => 'f',
                Gate::Input => 'i',
                Gate::Output => 'o',
                Gate::Update => 'z',
                Gate::Reset => 'r',
            })
            .collect();
        format!("{}-r{}({})", self.arch, suffix, self.refine_mode)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.hidden_size == 0 {
            return Err(Error::Config(
                "input_size and hidden_size must be at least 1".into(),
            ));
        }
        if self.refine_state_update {
            return Err(Error::Config(
                "refinement inside the state interpolation (c_t / h_t update) is not allowed: \
                 it turns d(state_T)/d(state_t) into a product of unbounded factors"
                    .into(),
            ));
        }
        let refining = self.refine_mode != RefineMode::None;
        if refining == self.refined_gates.is_empty() {
            return Err(Error::Config(if refining {
                format!(
                    "refine mode `{}` needs at least one refined gate",
                    self.refine_mode
                )
            } else {
                "refined gates given but refine mode is `none`".to_string()
            }));
        }
        if self.unsafe_allow_forget_refine && self.arch != Arch::Lstm {
            return Err(Error::Config(
                "the unsafe forget-refine override only applies to LSTM".into(),
            ));
        }
        for gate in self.refined_gates.iter() {
            if self.arch.gate_index(gate).is_none() {
                return Err(Error::Config(format!(
                    "{} has no `{gate}` gate",
                    self.arch
                )));
            }
            match (self.arch, gate) {
                (Arch::Lstm, Gate::Forget) if !self.unsafe_allow_forget_refine => {
                    return Err(Error::Config(
                        "refining the LSTM forget gate is rejected: the memory-state gradient \
                         becomes a product of unbounded (f_k ⋄ x_k) factors and explodes"
                            .into(),
                    ));
                }
                (Arch::Gru, Gate::Update) => {
                    return Err(Error::Config(
                        "refining the GRU update gate is rejected: it drives the h_t \
                         interpolation and the hidden-state gradient explodes"
                            .into(),
                    ));
                }
                _ => {}
            }
        }
        if refining && self.cell_input_size() != self.hidden_size {
            return Err(Error::Config(format!(
                "refined gates combine x_t elementwise with a {}-dim gate; input_size {} \
                 needs the input projection enabled",
                self.hidden_size, self.input_size
            )));
        }
        Ok(())
    }

    /// Every legal (refine mode × gate subset) for an architecture,
    /// vanilla first.
    pub fn legal_variants(arch: Arch, input_size: usize, hidden_size: usize) -> Vec<CellConfig> {
        let base = CellConfig::new(arch, input_size, hidden_size);
        let mut out = vec![base];
        let subsets: Vec<Vec<Gate>> = match arch {
            Arch::Lstm => vec![
                vec![Gate::Input],
                vec![Gate::Output],
                vec![Gate::Input, Gate::Output],
            ],
            Arch::Gru => vec![vec![Gate::Reset]],
            Arch::Mgu => vec![vec![Gate::Forget]],
        };
        for mode in [RefineMode::Add, RefineMode::Mul] {
            for gates in &subsets {
                let mut cfg = base.refined(mode, gates);
                if input_size != hidden_size {
                    cfg.project_input = true;
                }
                out.push(cfg);
            }
        }
        out
    }
}
