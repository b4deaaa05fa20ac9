//! Modbus-TCP framing for the holding-register map: function codes 3 (read
//! holding registers) and 16 (write multiple registers), with standard
//! exception responses.

use thiserror::Error;

use super::registers::RegisterError;

pub const FC_READ_HOLDING: u8 = 0x03;
pub const FC_WRITE_MULTIPLE: u8 = 0x10;

pub const EXC_ILLEGAL_FUNCTION: u8 = 0x01;
pub const EXC_ILLEGAL_ADDRESS: u8 = 0x02;
pub const EXC_ILLEGAL_VALUE: u8 = 0x03;

const MBAP_LEN: usize = 7;
const MAX_READ: u16 = 125;
const MAX_WRITE: u16 = 123;
/// Largest ADU allowed by the protocol.
pub const MAX_FRAME: usize = 260;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MbapHeader {
    pub transaction: u16,
    pub unit: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Request {
    ReadHolding { addr: u16, count: u16 },
    WriteMultiple { addr: u16, values: Vec<u16> },
}

impl Request {
    pub fn function_code(&self) -> u8 {
        match self {
            Request::ReadHolding { .. } => FC_READ_HOLDING,
            Request::WriteMultiple { .. } => FC_WRITE_MULTIPLE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Response {
    Registers(Vec<u16>),
    Written { addr: u16, count: u16 },
    Exception { function: u8, code: u8 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("frame shorter than its header")]
    Truncated,
    #[error("unsupported protocol id {0}")]
    Protocol(u16),
    #[error("length field {0} out of range")]
    Length(u16),
    #[error("malformed response")]
    Malformed,
}

/// Total size of the frame at the start of `buf`, once the header is in.
pub fn frame_length(buf: &[u8]) -> Result<Option<usize>, FrameError> {
    if buf.len() < 6 {
        return Ok(None);
    }
    let len = u16::from_be_bytes([buf[4], buf[5]]);
    // unit id + function code at least
    if len < 2 || 6 + len as usize > MAX_FRAME {
        return Err(FrameError::Length(len));
    }
    Ok(Some(6 + len as usize))
}

fn u16_at(b: &[u8], i: usize) -> u16 {
    u16::from_be_bytes([b[i], b[i + 1]])
}

/// Decoded request, or the exception to answer with.
pub type Decoded = (MbapHeader, Result<Request, (u8, u8)>);

/// Decodes one complete request frame.
pub fn decode_request(frame: &[u8]) -> Result<Decoded, FrameError> {
    if frame.len() < MBAP_LEN + 1 {
        return Err(FrameError::Truncated);
    }
    let protocol = u16_at(frame, 2);
    if protocol != 0 {
        return Err(FrameError::Protocol(protocol));
    }
    let header = MbapHeader { transaction: u16_at(frame, 0), unit: frame[6] };
    let pdu = &frame[MBAP_LEN..];
    let fc = pdu[0];
    let bad_value = Err((fc, EXC_ILLEGAL_VALUE));
    let req = match fc {
        FC_READ_HOLDING => {
            if pdu.len() != 5 {
                bad_value
            } else {
                let (addr, count) = (u16_at(pdu, 1), u16_at(pdu, 3));
                if count == 0 || count > MAX_READ {
                    bad_value
                } else {
                    Ok(Request::ReadHolding { addr, count })
                }
            }
        }
        FC_WRITE_MULTIPLE => {
            if pdu.len() < 6 {
                bad_value
            } else {
                let (addr, count, bytes) = (u16_at(pdu, 1), u16_at(pdu, 3), pdu[5] as usize);
                if count == 0 || count > MAX_WRITE || bytes != 2 * count as usize || pdu.len() != 6 + bytes {
                    bad_value
                } else {
                    let values = (0..count as usize).map(|i| u16_at(pdu, 6 + 2 * i)).collect();
                    Ok(Request::WriteMultiple { addr, values })
                }
            }
        }
        other => Err((other, EXC_ILLEGAL_FUNCTION)),
    };
    Ok((header, req))
}

fn with_mbap(header: MbapHeader, pdu: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(MBAP_LEN + pdu.len());
    out.extend_from_slice(&header.transaction.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&((pdu.len() + 1) as u16).to_be_bytes());
    out.push(header.unit);
    out.extend_from_slice(pdu);
    out
}

pub fn encode_response(header: MbapHeader, response: &Response) -> Vec<u8> {
    let mut pdu = Vec::new();
    match response {
        Response::Registers(values) => {
            pdu.push(FC_READ_HOLDING);
            pdu.push((values.len() * 2) as u8);
            for v in values {
                pdu.extend_from_slice(&v.to_be_bytes());
            }
        }
        Response::Written { addr, count } => {
            pdu.push(FC_WRITE_MULTIPLE);
            pdu.extend_from_slice(&addr.to_be_bytes());
            pdu.extend_from_slice(&count.to_be_bytes());
        }
        Response::Exception { function, code } => {
            pdu.push(function | 0x80);
            pdu.push(*code);
        }
    }
    with_mbap(header, &pdu)
}

/// Maps a register-map result to the response for `request`.
pub fn respond(request: &Request, result: Result<Option<Vec<u16>>, RegisterError>) -> Response {
    match (request, result) {
        (_, Err(e)) => Response::Exception { function: request.function_code(), code: e.exception_code() },
        (Request::ReadHolding { .. }, Ok(values)) => Response::Registers(values.unwrap_or_default()),
        (Request::WriteMultiple { addr, values }, Ok(_)) => {
            Response::Written { addr: *addr, count: values.len() as u16 }
        }
    }
}

pub fn encode_request(header: MbapHeader, request: &Request) -> Vec<u8> {
    let mut pdu = vec![request.function_code()];
    match request {
        Request::ReadHolding { addr, count } => {
            pdu.extend_from_slice(&addr.to_be_bytes());
            pdu.extend_from_slice(&count.to_be_bytes());
        }
        Request::WriteMultiple { addr, values } => {
            pdu.extend_from_slice(&addr.to_be_bytes());
            pdu.extend_from_slice(&(values.len() as u16).to_be_bytes());
            pdu.push((values.len() * 2) as u8);
            for v in values {
                pdu.extend_from_slice(&v.to_be_bytes());
            }
        }
    }
    with_mbap(header, &pdu)
}

pub fn decode_response(frame: &[u8]) -> Result<(MbapHeader, Response), FrameError> {
    if frame.len() < MBAP_LEN + 2 {
        return Err(FrameError::Truncated);
    }
    let header = MbapHeader { transaction: u16_at(frame, 0), unit: frame[6] };
    let pdu = &frame[MBAP_LEN..];
    let fc = pdu[0];
    let resp = if fc & 0x80 != 0 {
        Response::Exception { function: fc & 0x7F, code: pdu[1] }
    } else {
        match fc {
            FC_READ_HOLDING => {
                let n = pdu[1] as usize;
                if pdu.len() != 2 + n || n % 2 != 0 {
                    return Err(FrameError::Malformed);
                }
                Response::Registers((0..n / 2).map(|i| u16_at(pdu, 2 + 2 * i)).collect())
            }
            FC_WRITE_MULTIPLE if pdu.len() == 5 => Response::Written { addr: u16_at(pdu, 1), count: u16_at(pdu, 3) },
            _ => return Err(FrameError::Malformed),
        }
    };
    Ok((header, resp))
}
