//! Token-grid wire format: u32 h, u32 w, then h*w little-endian u16 indices
//! in row-major order.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::vq::types::TokenGrid;

pub fn write_token_grid(w: &mut impl Write, grid: &TokenGrid) -> Result<()> {
    let (h, cols) = grid.grid_dims();
    w.write_all(&(h as u32).to_le_bytes())?;
    w.write_all(&(cols as u32).to_le_bytes())?;
    for idx in grid.flat() {
        w.write_all(&idx.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_token_grid(r: &mut impl Read) -> Result<TokenGrid> {
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let h = u32::from_le_bytes(u32buf) as usize;
    r.read_exact(&mut u32buf)?;
    let w = u32::from_le_bytes(u32buf) as usize;
    if h == 0 || w == 0 || h.saturating_mul(w) > (1 << 24) {
        return Err(Error::data(format!("token grid header {h}x{w} out of range")));
    }
    let mut data = vec![0u8; h * w * 2];
    r.read_exact(&mut data)?;
    let flat: Vec<u16> = data
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    TokenGrid::from_flat(&flat, h, w)
}

pub fn save_token_grid(path: impl AsRef<std::path::Path>, grid: &TokenGrid) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    write_token_grid(&mut f, grid)
}

pub fn load_token_grid(path: impl AsRef<std::path::Path>) -> Result<TokenGrid> {
    let mut f = std::fs::File::open(path.as_ref()).map_err(|e| {
        Error::data(format!("cannot open token grid {}: {e}", path.as_ref().display()))
    })?;
    read_token_grid(&mut f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_round_trip() {
        let grid = TokenGrid::from_flat(&[1, 2, 300, 4, 5, 65535], 2, 3).unwrap();
        let mut buf = Vec::new();
        write_token_grid(&mut buf, &grid).unwrap();
        // header: h=2, w=3 little-endian, then 6 u16s
        assert_eq!(buf.len(), 8 + 12);
        assert_eq!(&buf[0..4], &2u32.to_le_bytes());
        assert_eq!(&buf[4..8], &3u32.to_le_bytes());
        assert_eq!(&buf[8..10], &1u16.to_le_bytes());
        let back = read_token_grid(&mut buf.as_slice()).unwrap();
        assert_eq!(back, grid);
    }

    #[test]
    fn truncated_stream_is_an_error() {
        let grid = TokenGrid::from_flat(&[1, 2, 3, 4], 2, 2).unwrap();
        let mut buf = Vec::new();
        write_token_grid(&mut buf, &grid).unwrap();
        buf.truncate(buf.len() - 1);
        assert!(read_token_grid(&mut buf.as_slice()).is_err());
    }
}
