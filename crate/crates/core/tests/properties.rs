mod common;

use cascade_core::lti::Orientation;
use cascade_core::pde::{Realization, WaveGrid};
use cascade_core::simulate::{assemble_closed_loop, integrate};
use cascade_core::synthesis::{synth_observer, synth_state_feedback, DesignOptions, LqrGains};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;

use common::{iff_verdicts, rng, siso_instance, sylvester_pair};

fn orientation() -> impl Strategy<Value = Orientation> {
    prop_oneof![Just(Orientation::Actuator), Just(Orientation::Sensor)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn formula_matches_vectorized_oracle(seed in any::<u64>(), o in orientation()) {
        let pair = sylvester_pair(seed, o).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(pair.mismatch() < 1e-10, "mismatch {:e}", pair.mismatch());
        prop_assert!(pair.residual < 1e-10, "residual {:e}", pair.residual);
    }

    #[test]
    fn check_agrees_with_hautus(seed in any::<u64>(), o in orientation(), zero in any::<bool>()) {
        let inst = siso_instance(&mut rng(seed), o, zero);
        let (check, hautus) = iff_verdicts(&inst).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(check, hautus);
        if zero {
            prop_assert!(!check, "transmission zero at {} not detected", inst.lam0);
        }
    }

    #[test]
    fn synthesized_products_satisfy_eigenvector_identities(seed in any::<u64>(), o in orientation()) {
        let inst = siso_instance(&mut rng(seed), o, false);
        let opts = DesignOptions::default();
        let defect = match o {
            Orientation::Actuator => synth_state_feedback(&inst.plant, &inst.pde, &LqrGains, &opts)
                .map(|law| law.identity_defect()),
            Orientation::Sensor => synth_observer(&inst.plant, &inst.pde, &LqrGains, &opts)
                .map(|obs| obs.identity_defect()),
        };
        match defect {
            Ok(d) => prop_assert!(d < 1e-8, "identity defect {d:e}"),
            // A random draw may sit too close to a zero for the margin.
            Err(e) => prop_assert!(e.is_infeasible(), "{e}"),
        }
    }

    #[test]
    fn halving_the_step_reproduces_the_trajectory(seed in any::<u64>(), o in orientation()) {
        let mut r = rng(seed);
        let inst = siso_instance(&mut r, o, false);
        let mut sys = assemble_closed_loop(&inst.plant, &inst.pde, None, 0.0).unwrap();
        sys.initial = DVector::from_fn(sys.dim(), |_, _| r.random_range(-1.0..1.0));
        let coarse = integrate(&sys, 2.0, 0.1).unwrap();
        let fine = integrate(&sys, 2.0, 0.05).unwrap();
        for (k, x) in coarse.states.iter().enumerate() {
            let y = &fine.states[2 * k];
            prop_assert!((x - y).norm() <= 1e-10 * x.norm().max(1.0), "step {k}");
        }
    }

    #[test]
    fn wave_energy_is_nonincreasing(seed in any::<u64>()) {
        let mut r = rng(seed);
        let grid = WaveGrid::new(32).unwrap();
        let a = grid.truncation().a.to_dense();
        let phi = (&a * 0.01).exp();
        let mut x = DVector::from_fn(a.nrows(), |_, _| r.random_range(-1.0..1.0));
        let mut energy = grid.energy(x.as_slice());
        for _ in 0..200 {
            x = &phi * x;
            let next = grid.energy(x.as_slice());
            prop_assert!(next <= energy + 1e-8 * energy.max(1.0), "{next} > {energy}");
            energy = next;
        }
    }
}
