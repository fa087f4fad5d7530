//! GP parents: a threshold chain for crossover and a parity chain for
//! mutation.

use crate::bits::BitVector;
use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::gp::{Comparison, GpProgram, Operand, Statement};

use super::oracle::{exact_crossover_distribution, exact_mutation_distribution, MAX_DISAGREEMENTS};
use super::{apportion, crossover_width, ApproxTarget, ConstructionReport};

/// Integer cut points `1 = c_0 ≤ c_1 ≤ … ≤ c_m = 2^L − 1` of the threshold
/// chain: a uniform `K ∈ [0, 2^L)` selects the first parent phenotype when
/// `K < c_0`, support point `i` when `c_{i−1} ≤ K < c_i`, and the second
/// parent phenotype when `K = 2^L − 1`. Inner cuts are `⌊2^L Σ_{j≤i} p_j⌋`.
pub(crate) fn threshold_cuts(mu: &DiscreteDistribution, width: usize) -> Vec<u64> {
    let cells = 1u64 << width;
    let mut cuts = vec![1];
    let mut cum = 0.0;
    let m = mu.len();
    for (_, p) in &mu.support()[..m - 1] {
        cum += p;
        let t = ((cells as f64) * cum + 1e-9).floor() as u64;
        let prev = *cuts.last().expect("non-empty");
        cuts.push(t.clamp(prev, cells - 1));
    }
    cuts.push(cells - 1);
    cuts
}

/// Achieved distribution of a threshold chain, by counting cells.
pub(crate) fn chain_distribution(
    mu: &DiscreteDistribution,
    cuts: &[u64],
    width: usize,
    y1: &BitVector,
    y2: &BitVector,
) -> Result<DiscreteDistribution> {
    let cells = (1u64 << width) as f64;
    let mut mass = vec![(y1.clone(), 1.0 / cells)];
    for (i, (y, _)) in mu.support().iter().enumerate() {
        mass.push((y.clone(), (cuts[i + 1] - cuts[i]) as f64 / cells));
    }
    mass.push((y2.clone(), 1.0 / cells));
    collect_mass(mu.dim(), mass)
}

pub(crate) fn collect_mass(dim: usize, mass: Vec<(BitVector, f64)>) -> Result<DiscreteDistribution> {
    let mut merged: Vec<(BitVector, f64)> = Vec::new();
    for (y, p) in mass {
        if p == 0.0 {
            continue;
        }
        match merged.iter_mut().find(|(z, _)| *z == y) {
            Some(e) => e.1 += p,
            None => merged.push((y, p)),
        }
    }
    DiscreteDistribution::new(dim, merged)
}

/// Two threshold-chain programs that differ only in the evolvable control
/// vector `a` (all zeros versus all ones).
///
/// The child's `a` is a uniform integer in `[0, 2^L)`; the chain of
/// comparisons against frozen cut constants maps it to a phenotype.
pub fn build_gp_crossover_parents(
    target: &ApproxTarget,
) -> Result<(GpProgram, GpProgram, ConstructionReport)> {
    let (y1, y2) = target.crossover_parents()?;
    let mu = &target.mu;
    let n = mu.dim();
    let width = target.width.unwrap_or_else(|| crossover_width(target.epsilon));
    if width == 0 || width > 62 {
        return Err(Error::InvalidArgument(format!("control width {width} outside 1..=62")));
    }
    let m = mu.len();
    if width < 63 && (m as u128) + 2 > (1u128 << width) {
        return Err(Error::SupportTooLarge { support: m, width });
    }
    let cuts = threshold_cuts(mu, width);
    let top = (1u64 << width) - 1;

    let program = |a: BitVector| -> Result<GpProgram> {
        let mut st = vec![Statement::Assign {
            name: "a".into(),
            value: a,
            evolvable: true,
        }];
        let ret = |y: &BitVector| Operand::Bits(y.clone());
        st.push(Statement::IfCompareReturn {
            lhs: Operand::var("a"),
            cmp: Comparison::Less,
            rhs: Operand::Int(1),
            ret: ret(y1),
        });
        for (i, (y, _)) in mu.support().iter().enumerate() {
            let rhs = if i + 1 == m {
                Operand::Int(top)
            } else {
                Operand::Bits(BitVector::from_integer(cuts[i + 1], width)?)
            };
            st.push(Statement::IfCompareReturn {
                lhs: Operand::var("a"),
                cmp: Comparison::Less,
                rhs,
                ret: ret(y),
            });
        }
        st.push(Statement::Return(ret(y2)));
        GpProgram::new(n, st)
    };
    let p1 = program(BitVector::zeros(width))?;
    let p2 = program(BitVector::ones(width))?;

    let (achieved, exact) = if width <= MAX_DISAGREEMENTS {
        (exact_crossover_distribution(&p1, &p2, GpProgram::evaluate)?, true)
    } else {
        (chain_distribution(mu, &cuts, width, y1, y2)?, false)
    };
    let cut_list: Vec<String> = cuts.iter().map(u64::to_string).collect();
    let report = ConstructionReport::new(mu, &achieved, target.epsilon, p1.symbol_size(), width, exact)?
        .with_parameter("L", width)
        .with_parameter("cuts", cut_list.join(" "));
    Ok((p1, p2, report))
}

/// The total control budget `Σ L_i = ⌈2mn/ε⌉`.
pub(crate) fn parity_budget(m: usize, n: usize, epsilon: f64) -> usize {
    let x = 2.0 * (m * n) as f64 / epsilon;
    (x - 1e-9).ceil().max(1.0) as usize
}

/// A parity-chain program: control blocks `a_i` (all zeros) with lengths
/// apportioned to `p_i`, evolvable stored phenotypes `y_i` and a frozen
/// fallback `y'`. A single flip inside `a_i` makes `par(a_i) = 1` and the
/// program returns `y_i`; a flip anywhere else leaves the output at `y'`.
pub fn build_gp_mutation_parent(target: &ApproxTarget) -> Result<(GpProgram, ConstructionReport)> {
    let y_parent = target.mutation_parent()?;
    let mu = &target.mu;
    let (n, m) = (mu.dim(), mu.len());
    let budget = target.width.unwrap_or_else(|| parity_budget(m, n, target.epsilon));
    let quotas: Vec<f64> = mu.support().iter().map(|(_, p)| p * budget as f64).collect();
    let lengths = apportion(&quotas, budget);

    let mut st = Vec::new();
    let mut branches = Vec::new();
    for (i, ((y, _), &len)) in mu.support().iter().zip(&lengths).enumerate() {
        if len == 0 {
            continue;
        }
        let (a, yi) = (format!("a{}", i + 1), format!("y{}", i + 1));
        st.push(Statement::Assign {
            name: a.clone(),
            value: BitVector::zeros(len),
            evolvable: true,
        });
        st.push(Statement::Assign {
            name: yi.clone(),
            value: y.clone(),
            evolvable: true,
        });
        branches.push(Statement::IfParityReturn {
            cond: a,
            ret: Operand::Var(yi),
        });
    }
    st.push(Statement::Assign {
        name: "y_parent".into(),
        value: y_parent.clone(),
        evolvable: false,
    });
    st.extend(branches);
    st.push(Statement::Return(Operand::var("y_parent")));
    let program = GpProgram::new(n, st)?;

    let achieved = exact_mutation_distribution(&program, GpProgram::evaluate)?;
    let list: Vec<String> = lengths.iter().map(usize::to_string).collect();
    let report = ConstructionReport::new(
        mu,
        &achieved,
        target.epsilon,
        program.symbol_size(),
        program.layout().total,
        true,
    )?
    .with_parameter("control_budget", budget)
    .with_parameter("control_lengths", list.join(" "));
    Ok((program, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bv;

    fn two_point() -> DiscreteDistribution {
        DiscreteDistribution::new(4, vec![(bv("0101"), 0.5), (bv("1010"), 0.5)]).unwrap()
    }

    #[test]
    fn crossover_two_point_target() {
        let t = ApproxTarget::crossover(two_point(), 0.05, bv("0000"), bv("1111")).unwrap();
        let (p1, p2, r) = build_gp_crossover_parents(&t).unwrap();
        assert_eq!(r.parameter("L"), Some("7"));
        assert!(r.certified(), "{}", r.to_text());
        assert!(r.exact);
        assert_eq!(p1.evaluate().unwrap(), bv("0000"));
        assert_eq!(p2.evaluate().unwrap(), bv("1111"));
        // 64 cells each, one lost to each reserved cell
        assert_eq!(r.achieved(&bv("0101")), 63.0 / 128.0);
        assert_eq!(r.achieved(&bv("1010")), 63.0 / 128.0);
    }

    #[test]
    fn crossover_point_mass() {
        let mu = DiscreteDistribution::point_mass(bv("0110"));
        let t = ApproxTarget::crossover(mu, 0.1, bv("0000"), bv("1111")).unwrap();
        let (_, _, r) = build_gp_crossover_parents(&t).unwrap();
        assert!(r.achieved_error <= 2.0 / 64.0 + 1e-15);
    }

    #[test]
    fn crossover_counts_match_cells() {
        let mu = DiscreteDistribution::new(
            3,
            vec![(bv("001"), 0.2), (bv("010"), 0.3), (bv("100"), 0.5)],
        )
        .unwrap();
        let t = ApproxTarget::crossover(mu.clone(), 0.1, bv("000"), bv("111")).unwrap();
        let (_, _, r) = build_gp_crossover_parents(&t).unwrap();
        let cuts = threshold_cuts(&mu, 6);
        let predicted = chain_distribution(&mu, &cuts, 6, &bv("000"), &bv("111")).unwrap();
        for line in &r.support {
            assert_eq!(line.achieved, predicted.prob(&line.phenotype));
        }
    }

    #[test]
    fn support_too_large() {
        let pts: Vec<_> = (0..16u64)
            .map(|i| (BitVector::from_integer(i, 4).unwrap(), 1.0 / 16.0))
            .collect();
        let mu = DiscreteDistribution::new(4, pts).unwrap();
        let t = ApproxTarget::crossover(mu, 0.2, bv("0000"), bv("1111")).unwrap().with_width(4);
        assert!(matches!(
            build_gp_crossover_parents(&t),
            Err(Error::SupportTooLarge { support: 16, width: 4 })
        ));
    }

    #[test]
    fn mutation_position_counting() {
        let t = ApproxTarget::mutation(two_point(), 0.1, bv("0000"))
            .unwrap()
            .with_width(40);
        let (p, r) = build_gp_mutation_parent(&t).unwrap();
        assert_eq!(p.layout().total, 48);
        assert_eq!(r.parameter("control_lengths"), Some("20 20"));
        assert_eq!(r.achieved(&bv("0101")), 20.0 / 48.0);
        assert_eq!(r.achieved(&bv("0000")), 8.0 / 48.0);
        assert_eq!(p.evaluate().unwrap(), bv("0000"));
    }

    #[test]
    fn mutation_default_budget() {
        let t = ApproxTarget::mutation(two_point(), 0.1, bv("0000")).unwrap();
        let (_, r) = build_gp_mutation_parent(&t).unwrap();
        assert_eq!(r.parameter("control_budget"), Some("160"));
        assert!(r.certified());
    }

    #[test]
    fn flips_in_stored_phenotypes_are_silent() {
        let t = ApproxTarget::mutation(two_point(), 0.2, bv("1100")).unwrap();
        let (p, _) = build_gp_mutation_parent(&t).unwrap();
        let (g, layout) = p.flatten();
        for slot in layout.slots.iter().filter(|s| s.name.starts_with('y')) {
            for k in slot.offset..slot.offset + slot.len {
                let mut h = g.clone();
                h.flip(k);
                assert_eq!(p.unflatten(&h).unwrap().evaluate().unwrap(), bv("1100"));
            }
        }
    }
}
