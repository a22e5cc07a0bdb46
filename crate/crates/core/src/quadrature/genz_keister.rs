//! Nested Genz-Keister rules for the standard normal density.
//!
//! Generated by `scripts/genz_keister.py` (80-digit arithmetic); each stage
//! lists the nonnegative half `(node, weight)` of a symmetric rule. Digits
//! beyond f64 precision are kept as generated.
#![allow(clippy::excessive_precision)]

pub const STAGE_SIZES: [usize; 5] = [1, 3, 9, 19, 35];

/// Polynomial degree integrated exactly by each stage.
pub const STAGE_DEGREES: [u32; 5] = [1, 5, 15, 29, 51];

static STAGES: [&[(f64, f64)]; 5] = [
    &[(0.0, 1.0)],
    &[(0.0, 0.66666666666666666667), (1.7320508075688772935, 0.16666666666666666667)],
    &[
        (0.0, 0.25396825396825396825),
        (0.74109534999454084186, 0.27007432957793787076),
        (1.7320508075688772935, 0.094850948509485094851),
        (2.8612795760570581173, 0.0079963254708935327699),
        (4.1849560176727318607, 0.000094269457556517489445),
    ],
    &[
        (0.0, 0.30346719985420586643),
        (0.74109534999454084186, 0.20832499164960887781),
        (1.2304236340273060078, 0.061151730125247677114),
        (1.7320508075688772935, 0.064096054686807588711),
        (2.5960831150492021594, 0.018085234254798452772),
        (2.8612795760570581173, -0.0063372247933737358541),
        (3.2053337944991945187, 0.0028848804365067512912),
        (4.1849560176727318607, 0.000060123369459847818499),
        (5.187016039913656066, 6.0948087314689834604e-7),
        (6.3633944943363699876, 8.629684602229885768e-10),
    ],
    &[
        (0.0, 0.0005148945080687842938),
        (0.24899229757996061181, 0.19176011588804442959),
        (0.74109534999454084186, 0.14807083115521600615),
        (1.2304236340273060078, 0.092364726716986305928),
        (1.7320508075688772935, 0.045273685465150515865),
        (2.233626061676941652, 0.015673473751851151542),
        (2.5960831150492021594, 0.0031554462691875638051),
        (2.8612795760570581173, 0.0023113452403522101207),
        (3.2053337944991945187, 0.00081895392750226490906),
        (3.6353185190372782452, 0.000275242141167851575),
        (4.1849560176727318607, 0.000035729348198975100228),
        (4.7364330859522970841, 2.7342206801187829817e-6),
        (5.187016039913656066, 2.4676421345798078671e-7),
        (5.6981777684881095893, 2.1394194479561106307e-8),
        (6.3633944943363699876, 4.6011760348656187011e-10),
        (7.1221067008046166582, 3.0972223576063161713e-12),
        (7.9807717985905608802, 5.4500412650636899171e-15),
        (9.0169397898903025175, 1.0541326582333341189e-18),
    ],
];

/// FNV-1a over the bit patterns of every table entry.
pub const TABLE_CHECKSUM: u64 = 9448521857596894061;

pub fn table_checksum() -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for stage in STAGES.iter() {
        for &(x, w) in stage.iter() {
            for byte in x.to_bits().to_le_bytes().into_iter().chain(w.to_bits().to_le_bytes()) {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }
    h
}

/// Full symmetric rule of 1-based `stage`, nodes ascending.
pub fn stage_rule(stage: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let half = STAGES.get(stage.checked_sub(1)?)?;
    let mut nodes = Vec::with_capacity(2 * half.len() - 1);
    let mut weights = Vec::with_capacity(2 * half.len() - 1);
    for &(x, w) in half.iter().rev().filter(|(x, _)| *x > 0.0) {
        nodes.push(-x);
        weights.push(w);
    }
    for &(x, w) in half.iter() {
        nodes.push(x);
        weights.push(w);
    }
    Some((nodes, weights))
}
