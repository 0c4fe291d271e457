mod common;

use common::*;
use proptest::prelude::*;
use sqd_core::fock::{build_dense, connected, matrix_element, sector_basis, DENSE_CAP};
use sqd_core::hamiltonian::{parse_fcidump, write_fcidump};
use sqd_core::toy::random_hamiltonian;
use sqd_core::{ActiveSpaceHamiltonian, Determinant};

fn arbitrary_hamiltonian(m: usize, na: usize, nb: usize, values: &[f64]) -> ActiveSpaceHamiltonian {
    let mut h = ActiveSpaceHamiltonian::zeros(m, na, nb).unwrap();
    let mut it = values.iter().cycle();
    for p in 0..m {
        for r in 0..=p {
            h.set_h_one(p, r, *it.next().unwrap());
        }
    }
    for p in 0..m {
        for r in 0..=p {
            for q in 0..=p {
                for s in 0..=q {
                    h.set_eri(p, r, q, s, *it.next().unwrap());
                }
            }
        }
    }
    h.set_e_core(*it.next().unwrap());
    h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fcidump_round_trip(
        m in 1usize..5,
        values in prop::collection::vec(-10.0f64..10.0, 1..200),
        scale in prop::sample::select(vec![1.0, 1e-9, 1e7]),
    ) {
        let values: Vec<f64> = values.iter().map(|v| v * scale).collect();
        let na = m / 2;
        let h = arbitrary_hamiltonian(m, na, m - na, &values);
        let back = parse_fcidump(&write_fcidump(&h)).unwrap();
        prop_assert!(!back.core_energy_missing);
        let back = back.hamiltonian;
        prop_assert_eq!(back.sector(), h.sector());
        for (a, b) in h.h_one_slice().iter().zip(back.h_one_slice()) {
            prop_assert!((a - b).abs() <= 1e-15 * a.abs());
        }
        for (a, b) in h.eri_slice().iter().zip(back.eri_slice()) {
            prop_assert!((a - b).abs() <= 1e-15 * a.abs());
        }
        prop_assert_eq!(back.e_core(), h.e_core());
        prop_assert!(back.is_symmetric());
    }

    #[test]
    fn hermiticity(seed in 0u64..1000, i in 0usize..36, j in 0usize..36) {
        let h = random_hamiltonian(4, 2, 2, seed).unwrap();
        let basis = sector_basis(4, 2, 2);
        let (a, b) = (&basis[i], &basis[j]);
        prop_assert_eq!(matrix_element(&h, a, b).unwrap(), matrix_element(&h, b, a).unwrap());
    }
}

#[test]
fn random_4e4o_round_trip_is_exact() {
    let h = random_hamiltonian(4, 2, 2, 17).unwrap();
    let back = parse_fcidump(&write_fcidump(&h)).unwrap().hamiltonian;
    assert_eq!(back, h);
}

#[test]
fn write_is_deterministic_and_canonical() {
    let h = random_hamiltonian(3, 1, 1, 2).unwrap();
    let text = write_fcidump(&h);
    assert_eq!(text, write_fcidump(&h));
    let idx: Vec<(usize, usize, usize, usize)> = text
        .lines()
        .skip_while(|l| !l.contains("&END"))
        .skip(1)
        .map(|l| {
            let f: Vec<usize> = l.split_whitespace().skip(1).map(|x| x.parse().unwrap()).collect();
            (f[0], f[1], f[2], f[3])
        })
        .collect();
    let eri: Vec<_> = idx.iter().filter(|t| t.2 > 0).collect();
    assert!(eri.windows(2).all(|w| w[0] < w[1]));
    assert!(eri.iter().all(|&&(i, j, k, l)| i >= j && k >= l && (i, j) >= (k, l)));
    // unique elements of a dense random (pr|qs): M(M+1)/2 = 6 pairs -> 21
    assert_eq!(eri.len(), 21);
    assert_eq!(*idx.last().unwrap(), (0, 0, 0, 0));
}

#[test]
fn slater_condon_matches_fock_space_operators() {
    for (seed, (m, na, nb)) in [(1, (4, 2, 2)), (2, (4, 2, 2)), (3, (4, 3, 1)), (4, (3, 2, 1)), (5, (4, 1, 2))] {
        let h = random_hamiltonian(m, na, nb, seed).unwrap();
        let basis = brute_sector(m, na, nb);
        assert_eq!(basis, sector_basis(m, na, nb));
        let oracle = fock_sector_matrix(&h, &basis);
        let dense = build_dense(&h, (na, nb), DENSE_CAP).unwrap();
        for i in 0..basis.len() {
            for j in 0..basis.len() {
                let v = matrix_element(&h, &basis[i], &basis[j]).unwrap();
                assert!(
                    (v - oracle[(i, j)]).abs() < 1e-12,
                    "seed {seed} {} {}: {v} vs {}",
                    basis[i],
                    basis[j],
                    oracle[(i, j)]
                );
                assert_eq!(dense.matrix[(i, j)], v);
            }
        }
        let (e, _) = dense.ground_state();
        assert!((e - lowest_eigenvalue(&oracle)).abs() < 1e-10);
        assert!((&dense.matrix - dense.matrix.transpose()).amax() < 1e-13);
    }
}

#[test]
fn connected_covers_every_nonzero_coupling() {
    let h = random_hamiltonian(4, 2, 2, 21).unwrap();
    let basis = sector_basis(4, 2, 2);
    for d in &basis {
        let conn = connected(&h, d);
        let brute: Vec<(Determinant, f64)> = basis
            .iter()
            .filter(|x| *x != d)
            .map(|x| (*x, fock_element(&h, to_fock(4, x), to_fock(4, d))))
            .filter(|(_, v)| v.abs() > 1e-14)
            .collect();
        assert_eq!(conn.len(), brute.len());
        for ((a, va), (b, vb)) in conn.iter().zip(&brute) {
            assert_eq!(a, b);
            assert!((va - vb).abs() < 1e-12);
        }
    }
}
