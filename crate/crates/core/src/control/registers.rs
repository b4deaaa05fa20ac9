//! PLC-style holding-register map between the supervisor and the plant.
//!
//! | address | content                                          | access |
//! |---------|--------------------------------------------------|--------|
//! | 0–1     | heartbeat, u32, +1 per tick                      | read   |
//! | 10–15   | q1/q2/q3 setpoints, i32 (µrad, µm, µm)           | write  |
//! | 20–25   | q1/q2/q3 positions, i32                          | read   |
//! | 30      | status word (see [`StatusWord`])                 | read   |
//! | 40      | command word (see [`CommandWord`])               | write  |
//! | 50–55   | q1/q2/q3 velocities, i32 (µrad/s, µm/s)          | read   |
//!
//! 32-bit values are stored as big-endian register pairs (high word first).
//! Every other address reads as zero and rejects writes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Joint, JointVector, PerJoint};

pub const REGISTER_COUNT: usize = 64;

pub const HEARTBEAT: u16 = 0;
pub const SETPOINT_BASE: u16 = 10;
pub const POSITION_BASE: u16 = 20;
pub const STATUS: u16 = 30;
pub const COMMAND: u16 = 40;
pub const VELOCITY_BASE: u16 = 50;

/// Address of the first register of a joint's 32-bit value in a block.
pub fn joint_register(base: u16, joint: Joint) -> u16 {
    base + 2 * joint.index() as u16
}

/// Register units per joint unit: µrad for q1, µm for q2 and q3.
pub fn register_scale(joint: Joint) -> f64 {
    match joint {
        Joint::Q1 => 1e6,
        Joint::Q2 | Joint::Q3 => 1e3,
    }
}

/// Fixed-point encoding of a joint value, saturating at the i32 range.
pub fn encode_joint(joint: Joint, value: f64) -> i32 {
    let scaled = (value * register_scale(joint)).round();
    if scaled.is_nan() {
        0
    } else {
        scaled.clamp(i32::MIN as f64, i32::MAX as f64) as i32
    }
}

pub fn decode_joint(joint: Joint, raw: i32) -> f64 {
    raw as f64 / register_scale(joint)
}

/// Exception codes, mirroring the Modbus exception semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum RegisterError {
    #[error("illegal data address")]
    IllegalAddress,
    #[error("illegal data value")]
    IllegalValue,
}

impl RegisterError {
    pub fn exception_code(self) -> u8 {
        match self {
            RegisterError::IllegalAddress => 0x02,
            RegisterError::IllegalValue => 0x03,
        }
    }
}

/// Values accepted in the command word. Zero means "no command".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CommandWord {
    HomeAll = 1,
    EStop = 2,
    Reset = 3,
}

impl CommandWord {
    pub fn from_raw(v: u16) -> Option<CommandWord> {
        match v {
            1 => Some(CommandWord::HomeAll),
            2 => Some(CommandWord::EStop),
            3 => Some(CommandWord::Reset),
            _ => None,
        }
    }
}

/// Bits of the status register. Bits 4–6 hold the supervisor mode code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StatusWord {
    pub homed_all: bool,
    pub fault_any: bool,
    pub estop: bool,
    pub aligned: bool,
    pub mode_code: u8,
}

impl StatusWord {
    pub fn to_raw(self) -> u16 {
        (self.homed_all as u16)
            | (self.fault_any as u16) << 1
            | (self.estop as u16) << 2
            | (self.aligned as u16) << 3
            | ((self.mode_code as u16) & 0x7) << 4
    }

    pub fn from_raw(raw: u16) -> Self {
        StatusWord {
            homed_all: raw & 1 != 0,
            fault_any: raw & 2 != 0,
            estop: raw & 4 != 0,
            aligned: raw & 8 != 0,
            mode_code: ((raw >> 4) & 0x7) as u8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Access {
    Reserved,
    ReadOnly,
    ReadWrite,
}

fn access(addr: u16) -> Access {
    match addr {
        0..=1 | 20..=25 | 30 | 50..=55 => Access::ReadOnly,
        10..=15 | 40 => Access::ReadWrite,
        _ => Access::Reserved,
    }
}

/// The register file. Cloning it is how snapshots are published.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterMap {
    regs: [u16; REGISTER_COUNT],
}

impl Default for RegisterMap {
    fn default() -> Self {
        RegisterMap { regs: [0; REGISTER_COUNT] }
    }
}

fn check_range(addr: u16, count: usize) -> Result<std::ops::Range<usize>, RegisterError> {
    let start = addr as usize;
    let end = start + count;
    if count == 0 || end > REGISTER_COUNT {
        return Err(RegisterError::IllegalAddress);
    }
    Ok(start..end)
}

impl RegisterMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// One read transaction.
    pub fn read(&self, addr: u16, count: u16) -> Result<Vec<u16>, RegisterError> {
        let range = check_range(addr, count as usize)?;
        Ok(self.regs[range].to_vec())
    }

    /// One external write transaction: all registers must be writable and the
    /// command word, if present, must hold a known command.
    pub fn write(&mut self, addr: u16, values: &[u16]) -> Result<(), RegisterError> {
        let range = check_range(addr, values.len())?;
        for (a, v) in range.clone().zip(values) {
            match access(a as u16) {
                Access::Reserved => return Err(RegisterError::IllegalAddress),
                Access::ReadOnly => return Err(RegisterError::IllegalValue),
                Access::ReadWrite if a as u16 == COMMAND && *v != 0 && CommandWord::from_raw(*v).is_none() => {
                    return Err(RegisterError::IllegalValue)
                }
                Access::ReadWrite => {}
            }
        }
        self.regs[range].copy_from_slice(values);
        Ok(())
    }

    pub fn raw(&self) -> &[u16; REGISTER_COUNT] {
        &self.regs
    }

    pub fn get_u32(&self, addr: u16) -> u32 {
        let a = addr as usize;
        (self.regs[a] as u32) << 16 | self.regs[a + 1] as u32
    }

    pub fn set_u32(&mut self, addr: u16, v: u32) {
        let a = addr as usize;
        self.regs[a] = (v >> 16) as u16;
        self.regs[a + 1] = v as u16;
    }

    pub fn get_i32(&self, addr: u16) -> i32 {
        self.get_u32(addr) as i32
    }

    pub fn set_i32(&mut self, addr: u16, v: i32) {
        self.set_u32(addr, v as u32);
    }

    pub fn heartbeat(&self) -> u32 {
        self.get_u32(HEARTBEAT)
    }

    pub fn bump_heartbeat(&mut self) {
        let hb = self.heartbeat().wrapping_add(1);
        self.set_u32(HEARTBEAT, hb);
    }

    pub fn setpoints(&self) -> JointVector {
        let v = PerJoint::from_fn(|j| decode_joint(j, self.get_i32(joint_register(SETPOINT_BASE, j))));
        JointVector::new(v.q1, v.q2, v.q3)
    }

    /// Writes the setpoints and returns them as the plant will see them.
    pub fn set_setpoints(&mut self, q: &JointVector) -> JointVector {
        for j in Joint::ALL {
            self.set_i32(joint_register(SETPOINT_BASE, j), encode_joint(j, q.get(j)));
        }
        self.setpoints()
    }

    pub fn positions(&self) -> JointVector {
        let v = PerJoint::from_fn(|j| decode_joint(j, self.get_i32(joint_register(POSITION_BASE, j))));
        JointVector::new(v.q1, v.q2, v.q3)
    }

    pub fn set_feedback(&mut self, positions: &JointVector, velocities: &JointVector) {
        for j in Joint::ALL {
            self.set_i32(joint_register(POSITION_BASE, j), encode_joint(j, positions.get(j)));
            self.set_i32(joint_register(VELOCITY_BASE, j), encode_joint(j, velocities.get(j)));
        }
    }

    pub fn status(&self) -> StatusWord {
        StatusWord::from_raw(self.regs[STATUS as usize])
    }

    pub fn set_status(&mut self, s: StatusWord) {
        self.regs[STATUS as usize] = s.to_raw();
    }

    /// Takes the pending command word, clearing the register.
    pub fn take_command(&mut self) -> Option<CommandWord> {
        let raw = std::mem::take(&mut self.regs[COMMAND as usize]);
        CommandWord::from_raw(raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn u32_pairs_are_big_endian() {
        let mut m = RegisterMap::new();
        m.set_u32(HEARTBEAT, 0x0001_FFFF);
        assert_eq!(m.read(0, 2).unwrap(), vec![0x0001, 0xFFFF]);
        m.bump_heartbeat();
        assert_eq!(m.read(0, 2).unwrap(), vec![0x0002, 0x0000]);
        m.set_i32(SETPOINT_BASE, -2);
        assert_eq!(m.read(10, 2).unwrap(), vec![0xFFFF, 0xFFFE]);
    }

    #[test]
    fn heartbeat_wraps() {
        let mut m = RegisterMap::new();
        m.set_u32(HEARTBEAT, u32::MAX);
        m.bump_heartbeat();
        assert_eq!(m.heartbeat(), 0);
    }

    #[test]
    fn access_rules() {
        let mut m = RegisterMap::new();
        assert_eq!(m.write(30, &[1]), Err(RegisterError::IllegalValue));
        assert_eq!(m.write(0, &[1, 2]), Err(RegisterError::IllegalValue));
        assert_eq!(m.write(5, &[1]), Err(RegisterError::IllegalAddress));
        assert_eq!(m.write(63, &[1, 2]), Err(RegisterError::IllegalAddress));
        assert_eq!(m.read(60, 5), Err(RegisterError::IllegalAddress));
        assert_eq!(m.read(0, 0), Err(RegisterError::IllegalAddress));
        assert_eq!(m.write(40, &[9]), Err(RegisterError::IllegalValue));
        // a failed transaction leaves nothing behind
        assert_eq!(m.write(14, &[1, 2, 3]), Err(RegisterError::IllegalAddress));
        assert_eq!(m.read(14, 2).unwrap(), vec![0, 0]);
        m.write(10, &[0, 1, 0, 2, 0, 3]).unwrap();
        m.write(40, &[2]).unwrap();
        assert_eq!(m.take_command(), Some(CommandWord::EStop));
        assert_eq!(m.read(40, 1).unwrap(), vec![0]);
    }

    #[test]
    fn fixed_point_round_trip() {
        assert_eq!(encode_joint(Joint::Q1, -1.9813347594720255), -1_981_335);
        assert_eq!(encode_joint(Joint::Q2, 298.29325654257712), 298_293);
        assert_eq!(decode_joint(Joint::Q3, 566_260), 566.26);
        assert_eq!(encode_joint(Joint::Q3, 1e12), i32::MAX);
        assert_eq!(encode_joint(Joint::Q3, f64::NAN), 0);
    }

    #[test]
    fn status_word_bits() {
        let s = StatusWord { homed_all: true, fault_any: false, estop: true, aligned: true, mode_code: 6 };
        assert_eq!(s.to_raw(), 0b110_1101);
        assert_eq!(StatusWord::from_raw(s.to_raw()), s);
    }
}
