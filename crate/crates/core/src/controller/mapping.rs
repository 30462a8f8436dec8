use crate::dram::{DramCoord, DramGeometry};
use crate::error::MapError;

fn field(address: u64, shift: &mut u32, bits: u32) -> u32 {
    let v = (address >> *shift) & ((1u64 << bits) - 1);
    *shift += bits;
    v as u32
}

/// Splits a physical address into DRAM coordinates.
///
/// Bit slices from least significant: line offset, channel, column, bank,
/// rank, row.
pub fn map_address(address: u64, geometry: &DramGeometry) -> Result<DramCoord, MapError> {
    let capacity = geometry.capacity_bytes();
    if address >= capacity {
        return Err(MapError::OutOfRange { address, capacity });
    }
    let mut shift = geometry.offset_bits();
    let channel = field(address, &mut shift, geometry.channel_bits());
    let column = field(address, &mut shift, geometry.column_bits());
    let bank = field(address, &mut shift, geometry.bank_bits());
    let rank = field(address, &mut shift, geometry.rank_bits());
    let row = field(address, &mut shift, geometry.row_bits());
    Ok(DramCoord {
        channel,
        rank,
        bank,
        row,
        column,
    })
}

/// Inverse of [`map_address`] with a zero line offset.
pub fn encode_address(coord: &DramCoord, geometry: &DramGeometry) -> Result<u64, MapError> {
    let checks = [
        ("channel", coord.channel, geometry.channels),
        ("rank", coord.rank, geometry.ranks_per_channel),
        ("bank", coord.bank, geometry.banks_per_rank),
        ("row", coord.row, geometry.rows_per_bank),
        ("column", coord.column, geometry.columns()),
    ];
    for (name, v, limit) in checks {
        if v >= limit {
            return Err(MapError::BadCoord {
                field: name,
                value: v.into(),
            });
        }
    }
    let mut shift = geometry.offset_bits();
    let mut addr = 0u64;
    for (v, bits) in [
        (coord.channel, geometry.channel_bits()),
        (coord.column, geometry.column_bits()),
        (coord.bank, geometry.bank_bits()),
        (coord.rank, geometry.rank_bits()),
        (coord.row, geometry.row_bits()),
    ] {
        addr |= u64::from(v) << shift;
        shift += bits;
    }
    Ok(addr)
}
