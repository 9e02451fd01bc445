//! Branch-free boolean composition for compound trigger conditions.
//!
//! `a && b` short-circuits and compiles to a conditional jump, which a
//! coverage-guided fuzzer sees as an extra edge. These helpers combine the
//! operands arithmetically so the whole condition stays in one basic block.
//! Both operands must already be evaluated by the caller.

/// Conjunction without short-circuit evaluation.
#[inline(always)]
pub fn and_nb(a: bool, b: bool) -> bool {
    ((a as u8) & (b as u8)) != 0
}

/// Disjunction without short-circuit evaluation.
#[inline(always)]
pub fn or_nb(a: bool, b: bool) -> bool {
    ((a as u8) | (b as u8)) != 0
}

#[inline(always)]
pub fn not_nb(a: bool) -> bool {
    ((a as u8) ^ 1) != 0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_tables() {
        for a in [false, true] {
            for b in [false, true] {
                assert_eq!(and_nb(a, b), a && b, "and({a},{b})");
                assert_eq!(or_nb(a, b), a || b, "or({a},{b})");
            }
            assert_eq!(not_nb(a), !a);
        }
        assert!(!and_nb(true, false));
        assert!(or_nb(false, true));
    }
}
