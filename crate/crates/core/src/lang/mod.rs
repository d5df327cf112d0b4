//! Concrete syntax of contracts and scenarios.

mod ast;
mod error;
mod lexer;
mod parser;
mod printer;

pub use ast::{
    Action, Agent, AgentKind, Contract, EventKind, Guard, Scenario, ScriptedEvent, Transaction,
    TIME_ORACLE, TOKEN_ORACLE,
};
pub use error::{LangError, LangErrorKind};
pub use parser::{parse_contract, parse_formula, parse_scenario};
pub use printer::{pretty_print, pretty_print_scenario, print_formula};
