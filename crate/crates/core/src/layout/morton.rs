//! Bit-interleaved (Z-order) block addressing.
//!
//! Column bits land in the even positions and row bits in the odd ones, so
//! `(0,1) -> 1`, `(1,0) -> 2`, `(2,1) -> 9`. This is the order in which the
//! block schedule walks `A_0, A_1, A_2, ...`.

use crate::error::{Error, Result};

#[inline]
fn spread(mut x: u64) -> u64 {
    x &= 0x0000_0000_ffff_ffff;
    x = (x | (x << 16)) & 0x0000_ffff_0000_ffff;
    x = (x | (x << 8)) & 0x00ff_00ff_00ff_00ff;
    x = (x | (x << 4)) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

#[inline]
fn compact(mut x: u64) -> u64 {
    x &= 0x5555_5555_5555_5555;
    x = (x | (x >> 1)) & 0x3333_3333_3333_3333;
    x = (x | (x >> 2)) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x | (x >> 4)) & 0x00ff_00ff_00ff_00ff;
    x = (x | (x >> 8)) & 0x0000_ffff_0000_ffff;
    x = (x | (x >> 16)) & 0x0000_0000_ffff_ffff;
    x
}

/// Interleaves a block's row and column into its Morton index.
pub fn morton_encode(block_row: u64, block_col: u64) -> Result<u64> {
    if block_row > u32::MAX as u64 || block_col > u32::MAX as u64 {
        return Err(Error::MortonOverflow {
            row: block_row,
            col: block_col,
        });
    }
    Ok(spread(block_col) | (spread(block_row) << 1))
}

/// Inverse of [`morton_encode`]; returns `(block_row, block_col)`.
pub fn morton_decode(index: u64) -> (u64, u64) {
    (compact(index >> 1), compact(index))
}

/// Linear address of a block inside a `grid_rows × grid_cols` grid whose
/// sides are powers of two.
///
/// The low `min(log2 rows, log2 cols)` bits of each coordinate are
/// interleaved as in [`morton_encode`]; the surplus high bits of the longer
/// axis are stacked above them. On square grids this is exactly the Morton
/// index, and on every grid it is a bijection onto `0..rows*cols`.
pub fn block_address(
    block_row: usize,
    block_col: usize,
    grid_rows: usize,
    grid_cols: usize,
) -> usize {
    debug_assert!(grid_rows.is_power_of_two() && grid_cols.is_power_of_two());
    debug_assert!(block_row < grid_rows && block_col < grid_cols);
    let side = grid_rows.min(grid_cols);
    let bits = side.trailing_zeros();
    let mask = side - 1;
    let low = spread((block_col & mask) as u64) | (spread((block_row & mask) as u64) << 1);
    let high = if grid_cols > grid_rows {
        block_col >> bits
    } else {
        block_row >> bits
    };
    ((high as u64) << (2 * bits)) as usize | low as usize
}

/// Inverse of [`block_address`].
pub fn block_coords(address: usize, grid_rows: usize, grid_cols: usize) -> (usize, usize) {
    let side = grid_rows.min(grid_cols);
    let bits = side.trailing_zeros();
    let low = (address & ((1usize << (2 * bits)) - 1)) as u64;
    let high = address >> (2 * bits);
    let (r, c) = morton_decode(low);
    let (mut r, mut c) = (r as usize, c as usize);
    if grid_cols > grid_rows {
        c |= high << bits;
    } else {
        r |= high << bits;
    }
    (r, c)
}
