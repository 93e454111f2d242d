//! Binary final-state snapshots.
//!
//! Layout: magic `KSZK`, format version (u32), dimension count (u32), the
//! per-dimension mode counts (u32 each), then one block per component of
//! row-major coefficients as little-endian f64. Everything is written
//! byte-exactly, so a write/read cycle reproduces the state bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};

use crate::basis::{ModeGrid, SpectralField};
use crate::error::{Error, Result};
use crate::solver::VectorState;

const MAGIC: &[u8; 4] = b"KSZK";
const VERSION: u32 = 1;

/// Serialize the state's coefficients into `sink`.
pub fn write_snapshot_to(sink: &mut impl Write, state: &VectorState) -> Result<()> {
    let grid = state.grid();
    sink.write_all(MAGIC)?;
    sink.write_all(&VERSION.to_le_bytes())?;
    sink.write_all(&(grid.dim() as u32).to_le_bytes())?;
    for &m in grid.modes() {
        sink.write_all(&(m as u32).to_le_bytes())?;
    }
    for component in state.components() {
        // Standard layout is row-major; iteration order matches.
        for &c in component.coeffs().iter() {
            sink.write_all(&c.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Deserialize a state recorded on `grid`, checking the header against it.
///
/// The snapshot stores only mode counts, not box lengths, so the caller
/// supplies the grid (normally rebuilt from the same config that produced
/// the snapshot).
pub fn read_snapshot_from(source: &mut impl Read, grid: &ModeGrid) -> Result<VectorState> {
    let mut magic = [0u8; 4];
    source.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Snapshot(format!(
            "bad magic {:?}, expected {:?}",
            magic, MAGIC
        )));
    }
    let mut u32_buf = [0u8; 4];
    source.read_exact(&mut u32_buf)?;
    let version = u32::from_le_bytes(u32_buf);
    if version != VERSION {
        return Err(Error::Snapshot(format!(
            "unsupported snapshot version {version}, expected {VERSION}"
        )));
    }
    source.read_exact(&mut u32_buf)?;
    let n = u32::from_le_bytes(u32_buf) as usize;
    if n != grid.dim() {
        return Err(Error::Snapshot(format!(
            "snapshot is {n}-dimensional, grid is {}-dimensional",
            grid.dim()
        )));
    }
    let mut modes = Vec::with_capacity(n);
    for _ in 0..n {
        source.read_exact(&mut u32_buf)?;
        modes.push(u32::from_le_bytes(u32_buf) as usize);
    }
    if modes != grid.modes() {
        return Err(Error::Snapshot(format!(
            "snapshot modes {:?} do not match grid modes {:?}",
            modes,
            grid.modes()
        )));
    }

    let count: usize = modes.iter().product();
    let mut components = Vec::with_capacity(n);
    let mut f64_buf = [0u8; 8];
    for _ in 0..n {
        let mut flat = Vec::with_capacity(count);
        for _ in 0..count {
            source.read_exact(&mut f64_buf)?;
            flat.push(f64::from_le_bytes(f64_buf));
        }
        let arr = ArrayD::from_shape_vec(IxDyn(grid.coeff_shape()), flat)
            .map_err(|e| Error::Snapshot(format!("shape error: {e}")))?;
        components.push(SpectralField::from_parts(grid.clone(), arr));
    }
    // Trailing data means the file does not describe this grid.
    let mut probe = [0u8; 1];
    if source.read(&mut probe)? != 0 {
        return Err(Error::Snapshot("trailing bytes after coefficients".into()));
    }
    VectorState::new(components, 0.0)
}

pub fn write_snapshot(path: &Path, state: &VectorState) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_snapshot_to(&mut file, state)?;
    file.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path, grid: &ModeGrid) -> Result<VectorState> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    read_snapshot_from(&mut file, grid)
}
