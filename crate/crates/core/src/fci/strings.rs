use crate::linalg::binom;

/// All occupation bitstrings of `n_elec` electrons in `n_orb` orbitals, in
/// ascending numeric order, with combinatorial addressing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StringSet {
    n_orb: usize,
    n_elec: usize,
    strings: Vec<u64>,
    // choose[i][k] = C(i, k)
    choose: Vec<Vec<usize>>,
}

impl StringSet {
    pub fn new(n_orb: usize, n_elec: usize) -> Self {
        assert!(n_orb < 64, "at most 63 orbitals");
        let choose = (0..=n_orb)
            .map(|i| (0..=n_elec.max(1)).map(|k| binom(i as i64, k as i64) as usize).collect())
            .collect();
        let mut strings = Vec::new();
        if n_elec <= n_orb {
            // Gosper's hack enumerates same-popcount integers in increasing order
            let mut s: u64 = if n_elec == 0 { 0 } else { (1u64 << n_elec) - 1 };
            let limit = 1u64 << n_orb;
            loop {
                strings.push(s);
                if s == 0 {
                    break;
                }
                let c = s & s.wrapping_neg();
                let r = s + c;
                s = (((r ^ s) >> 2) / c) | r;
                if s >= limit {
                    break;
                }
            }
        }
        Self { n_orb, n_elec, strings, choose }
    }

    pub fn n_orb(&self) -> usize {
        self.n_orb
    }

    pub fn n_elec(&self) -> usize {
        self.n_elec
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn strings(&self) -> &[u64] {
        &self.strings
    }

    #[inline]
    pub fn get(&self, k: usize) -> u64 {
        self.strings[k]
    }

    /// Rank of `bits` in the ordered list, `None` for a foreign string.
    #[inline]
    pub fn position(&self, bits: u64) -> Option<usize> {
        if bits.count_ones() as usize != self.n_elec || (self.n_orb < 64 && bits >> self.n_orb != 0) {
            return None;
        }
        let mut rank = 0;
        let mut b = bits;
        let mut k = 0;
        while b != 0 {
            let pos = b.trailing_zeros() as usize;
            k += 1;
            rank += self.choose[pos][k];
            b &= b - 1;
        }
        Some(rank)
    }

    /// All `(p, q, target, sign)` with `a†_p a_q |source⟩ = sign |target⟩`,
    /// including the diagonal `p == q` terms.
    pub fn single_replacements(&self) -> Vec<Vec<(usize, usize, usize, f64)>> {
        self.strings
            .iter()
            .map(|&s| {
                let mut out = Vec::new();
                for q in 0..self.n_orb {
                    if s >> q & 1 == 0 {
                        continue;
                    }
                    let removed = s & !(1u64 << q);
                    let sign_q = parity(s, q);
                    for p in 0..self.n_orb {
                        if removed >> p & 1 == 1 {
                            continue;
                        }
                        let t = removed | (1u64 << p);
                        let sign = sign_q * parity(removed, p);
                        out.push((p, q, self.position(t).expect("same popcount"), sign));
                    }
                }
                out
            })
            .collect()
    }
}

/// `(−1)^(number of occupied orbitals below p)`.
#[inline]
pub(crate) fn parity(bits: u64, p: usize) -> f64 {
    if (bits & ((1u64 << p) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}
