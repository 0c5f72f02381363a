//! Wire framing: `u32` little-endian payload length, `u8` tag length, tag
//! bytes, payload bytes.

use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub tag: String,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(tag: impl Into<String>, payload: Vec<u8>) -> Self {
        Frame {
            tag: tag.into(),
            payload,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let tag = self.tag.as_bytes();
        let tag_len = u8::try_from(tag.len())
            .map_err(|_| Error::ProtocolMisuse(format!("tag `{}` longer than 255 bytes", self.tag)))?;
        let len = u32::try_from(self.payload.len())
            .map_err(|_| Error::ProtocolMisuse("payload exceeds 4 GiB".into()))?;
        let mut out = Vec::with_capacity(5 + tag.len() + self.payload.len());
        out.extend_from_slice(&len.to_le_bytes());
        out.push(tag_len);
        out.extend_from_slice(tag);
        out.extend_from_slice(&self.payload);
        Ok(out)
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&self.encode()?)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> std::io::Result<Frame> {
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut tag_len = [0u8; 1];
        r.read_exact(&mut tag_len)?;
        let mut tag = vec![0u8; tag_len[0] as usize];
        r.read_exact(&mut tag)?;
        let mut payload = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut payload)?;
        let tag = String::from_utf8(tag)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok(Frame { tag, payload })
    }
}
