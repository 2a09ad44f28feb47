use stiga::tensor::{NodeKind, TensorSpace};
use stiga_bench::output::{read_solution, write_solution, SolutionBlock};

fn blocks() -> Vec<SolutionBlock> {
    (0..2)
        .map(|l| {
            let space = TensorSpace::uniform(&[1.0, 2.0, 0.5], &[3, 4, 2], 2, true).unwrap();
            let n = space.len();
            SolutionBlock {
                space,
                coeffs: (0..n).map(|k| (k + l) as f64 * 0.25 - 1.0).collect(),
                kinds: (0..n)
                    .map(|k| match k % 3 {
                        0 => NodeKind::Free,
                        1 => NodeKind::Dirichlet,
                        _ => NodeKind::Initial,
                    })
                    .collect(),
            }
        })
        .collect()
}

#[test]
fn round_trip() {
    let b = blocks();
    let mut buf = Vec::new();
    write_solution(&b, &mut buf).unwrap();
    assert_eq!(&buf[..8], b"STIGASOL");
    assert_eq!(read_solution(&buf[..]).unwrap(), b);
}

#[test]
fn header_layout() {
    let b = blocks();
    let mut buf = Vec::new();
    write_solution(&b, &mut buf).unwrap();
    let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap());
    assert_eq!(u32_at(8), 1);
    assert_eq!(u32_at(12), 2);
    assert_eq!(u32_at(16), 1);
    assert_eq!(u32_at(20), 3);
    // first direction: degree, knot count, knots
    assert_eq!(u32_at(24), 2);
    let count = u64::from_le_bytes(buf[28..36].try_into().unwrap());
    assert_eq!(count, 3 + 2 * 2 + 1);
    let first = f64::from_le_bytes(buf[36..44].try_into().unwrap());
    assert_eq!(first, 0.0);
}

#[test]
fn corrupt_files_are_rejected() {
    let mut buf = Vec::new();
    write_solution(&blocks(), &mut buf).unwrap();
    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(read_solution(&bad[..]).is_err());
    let mut bad = buf.clone();
    bad[8] = 9;
    assert!(read_solution(&bad[..]).is_err());
    assert!(read_solution(&buf[..buf.len() - 3]).is_err());
    let mut bad = buf.clone();
    let last = bad.len() - 1;
    bad[last] = 7;
    assert!(read_solution(&bad[..]).is_err());
}
