//! Scoped flush-to-zero for subnormal floats.
//!
//! Converging networks push gradients into the subnormal range, where x86
//! arithmetic falls back to microcode and GEMM slows by orders of magnitude.

/// While alive, subnormal inputs and results are treated as zero on this thread.
///
/// A no-op on targets without an MXCSR register.
#[must_use = "the mode is restored when the guard drops"]
pub struct FlushDenormals {
    #[cfg(target_arch = "x86_64")]
    saved: u32,
}

#[cfg(target_arch = "x86_64")]
mod mxcsr {
    use std::arch::asm;

    pub const FLUSH_TO_ZERO: u32 = 1 << 15;
    pub const DENORMALS_ARE_ZERO: u32 = 1 << 6;

    pub fn get() -> u32 {
        let mut v = 0u32;
        // SAFETY: stmxcsr only stores the control register into `v`.
        unsafe { asm!("stmxcsr [{}]", in(reg) &mut v, options(nostack, preserves_flags)) };
        v
    }

    pub fn set(v: u32) {
        // SAFETY: callers only toggle the FTZ/DAZ bits of a value read from the register.
        unsafe { asm!("ldmxcsr [{}]", in(reg) &v, options(nostack, preserves_flags)) };
    }
}

impl FlushDenormals {
    pub fn new() -> Self {
        #[cfg(target_arch = "x86_64")]
        {
            let saved = mxcsr::get();
            mxcsr::set(saved | mxcsr::FLUSH_TO_ZERO | mxcsr::DENORMALS_ARE_ZERO);
            Self { saved }
        }
        #[cfg(not(target_arch = "x86_64"))]
        Self {}
    }
}

impl Default for FlushDenormals {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for FlushDenormals {
    fn drop(&mut self) {
        #[cfg(target_arch = "x86_64")]
        mxcsr::set(self.saved);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    #[cfg(target_arch = "x86_64")]
    fn subnormals_flush_inside_the_guard_only() {
        let tiny = std::hint::black_box(f32::MIN_POSITIVE);
        let half = std::hint::black_box(0.5f32);
        assert!((tiny * half).is_subnormal());
        {
            let _g = FlushDenormals::new();
            assert_eq!(std::hint::black_box(tiny) * std::hint::black_box(half), 0.0);
        }
        assert!((std::hint::black_box(tiny) * half).is_subnormal());
    }
}
