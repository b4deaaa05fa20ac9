//! Supervisory control level: register map, Modbus framing, the command
//! channel and the supervisor that ties them to the plant.

pub mod command;
pub mod modbus;
pub mod registers;
pub mod service;
pub mod telemetry;

pub use command::{decode_line, Ack, AckStatus, Command, CommandMessage, RejectReason};
pub use registers::{RegisterError, RegisterMap, StatusWord};
pub use service::ControlService;
pub use telemetry::{Mode, TelemetryFrame};
