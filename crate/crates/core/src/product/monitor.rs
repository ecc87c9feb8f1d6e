use crate::cra::{CountingMachine, Cra, CraConfig, PathConfig, PathEncodingCra, PathPhase};
use crate::pdrm::{Configuration, Pdrm};
use crate::props::PropSet;

use super::{AbstractionSpec, Monitor, ProductError};

impl Monitor for Pdrm {
    type Config = Configuration;

    fn props(&self) -> &[String] {
        Pdrm::props(self)
    }

    fn reset(&self) -> Result<(Configuration, f64), ProductError> {
        Ok(self.initial_configuration()?)
    }

    fn advance(&self, config: &Configuration, sigma: PropSet) -> Result<(Configuration, f64), ProductError> {
        Ok(self.step(config, sigma)?)
    }

    fn is_final(&self, config: &Configuration) -> bool {
        config.terminal
    }

    fn write_key(&self, config: &Configuration, abstraction: AbstractionSpec, out: &mut Vec<u32>) {
        out.push(config.state.0);
        let k = match abstraction {
            AbstractionSpec::Full => usize::MAX,
            AbstractionSpec::TopK(k) => k,
        };
        out.extend(config.stack_top_first().take(k).map(|z| u32::from(z.0)));
    }
}

impl Monitor for Cra {
    type Config = CraConfig;

    fn props(&self) -> &[String] {
        Cra::props(self)
    }

    fn reset(&self) -> Result<(CraConfig, f64), ProductError> {
        Ok((self.initial_configuration(), 0.0))
    }

    fn advance(&self, config: &CraConfig, sigma: PropSet) -> Result<(CraConfig, f64), ProductError> {
        Ok(self.step(config, sigma)?)
    }

    fn is_final(&self, config: &CraConfig) -> bool {
        config.terminal
    }

    fn write_key(&self, config: &CraConfig, _abstraction: AbstractionSpec, out: &mut Vec<u32>) {
        out.push(config.state.0);
        for &c in &config.counters {
            out.push(c as u32);
            out.push((c >> 32) as u32);
        }
    }
}

/// Path-encoding automaton over a maze vocabulary.
pub struct PathMonitor {
    pub machine: PathEncodingCra,
    props: Vec<String>,
}

impl PathMonitor {
    pub fn new(props: &[String], op_budget: Option<u64>) -> Result<Self, ProductError> {
        Ok(PathMonitor {
            machine: PathEncodingCra::new(props, op_budget)?,
            props: props.to_vec(),
        })
    }
}

impl Monitor for PathMonitor {
    type Config = PathConfig;

    fn props(&self) -> &[String] {
        &self.props
    }

    fn reset(&self) -> Result<(PathConfig, f64), ProductError> {
        Ok((self.machine.start(), 0.0))
    }

    fn advance(&self, config: &PathConfig, sigma: PropSet) -> Result<(PathConfig, f64), ProductError> {
        Ok(self.machine.advance(config, sigma)?)
    }

    fn is_final(&self, config: &PathConfig) -> bool {
        self.machine.is_terminal(config)
    }

    fn write_key(&self, config: &PathConfig, _abstraction: AbstractionSpec, out: &mut Vec<u32>) {
        out.push(match config.phase {
            PathPhase::Outbound => 0,
            PathPhase::Return => 1,
            PathPhase::Won => 2,
            PathPhase::Lost => 3,
            PathPhase::Exhausted => 4,
        });
        out.push(config.length as u32);
        out.extend(config.encoding.to_u32_digits());
    }
}
