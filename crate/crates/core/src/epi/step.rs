//! One-year forward-Euler integration of the compartmental model.

use crate::error::SimError;

use super::{
    foi_from_pressures, infectious_pressure, CareStage, RiskGroup, SystemState, World, N_DISEASE,
    N_GROUPS, RATE_CAP,
};

/// Intervention levers for one (jurisdiction, risk group) block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRates {
    pub diagnostic: [f64; N_DISEASE],
    pub dropout: [f64; N_DISEASE],
    pub care_entry: [f64; N_DISEASE],
    /// Target PrEP coverage among the indicated pool, applied at the start
    /// of the year.
    pub prep_coverage_target: f64,
}

/// Per-block intervention rates for every (jurisdiction, risk group).
#[derive(Debug, Clone, PartialEq)]
pub struct InterventionRates {
    blocks: Vec<ChannelRates>,
}

impl InterventionRates {
    /// Baseline rates: the configured epidemiological rates everywhere, and
    /// PrEP targets that hold each block's current coverage.
    pub fn baseline(world: &World, state: &SystemState) -> Self {
        let p = &world.params;
        let mut blocks = Vec::with_capacity(world.n_jurisdictions() * N_GROUPS);
        for j in 0..world.n_jurisdictions() {
            for k in RiskGroup::ALL {
                blocks.push(ChannelRates {
                    diagnostic: p.diagnostic_rate,
                    dropout: p.dropout_rate,
                    care_entry: p.care_entry_rate,
                    prep_coverage_target: p.prep_coverage(state.block(j, k)),
                });
            }
        }
        InterventionRates { blocks }
    }

    pub fn block(&self, j: usize, k: RiskGroup) -> &ChannelRates {
        &self.blocks[j * N_GROUPS + k.index()]
    }

    pub fn block_mut(&mut self, j: usize, k: RiskGroup) -> &mut ChannelRates {
        &mut self.blocks[j * N_GROUPS + k.index()]
    }
}

/// Aggregates produced by one simulated year.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    n_jurisdictions: usize,
    /// New infections per (jurisdiction, risk group).
    new_infections: Vec<f64>,
    /// HIV tests administered per jurisdiction (diagnostic testing of the
    /// undiagnosed plus screening of the susceptible pool).
    tests_performed: Vec<f64>,
    /// Person-years spent in the two on-treatment stages, per jurisdiction.
    care_person_years: Vec<f64>,
    /// Person-years of PrEP coverage, per jurisdiction.
    prep_person_years: Vec<f64>,
}

impl StepOutcome {
    fn zeros(n: usize) -> Self {
        StepOutcome {
            n_jurisdictions: n,
            new_infections: vec![0.0; n * N_GROUPS],
            tests_performed: vec![0.0; n],
            care_person_years: vec![0.0; n],
            prep_person_years: vec![0.0; n],
        }
    }

    pub fn n_jurisdictions(&self) -> usize {
        self.n_jurisdictions
    }

    pub fn new_infections(&self, j: usize, k: RiskGroup) -> f64 {
        self.new_infections[j * N_GROUPS + k.index()]
    }

    pub fn total_new_infections(&self, j: usize) -> f64 {
        RiskGroup::ALL
            .iter()
            .map(|&k| self.new_infections(j, k))
            .sum()
    }

    pub fn system_new_infections(&self) -> f64 {
        self.new_infections.iter().sum()
    }

    pub fn tests_performed(&self, j: usize) -> f64 {
        self.tests_performed[j]
    }

    pub fn care_person_years(&self, j: usize) -> f64 {
        self.care_person_years[j]
    }

    pub fn prep_person_years(&self, j: usize) -> f64 {
        self.prep_person_years[j]
    }

    /// Builds an outcome with prescribed tallies so cost and reward
    /// arithmetic can be tested without running a simulation.
    #[cfg(test)]
    pub(crate) fn fabricate(
        new_infections: Vec<[f64; N_GROUPS]>,
        tests_performed: Vec<f64>,
        care_person_years: Vec<f64>,
        prep_person_years: Vec<f64>,
    ) -> Self {
        let n = new_infections.len();
        assert_eq!(tests_performed.len(), n);
        assert_eq!(care_person_years.len(), n);
        assert_eq!(prep_person_years.len(), n);
        StepOutcome {
            n_jurisdictions: n,
            new_infections: new_infections.into_iter().flatten().collect(),
            tests_performed,
            care_person_years,
            prep_person_years,
        }
    }
}

/// Values this close to zero (in persons) are treated as floating-point
/// noise and snapped to zero; anything more negative aborts the step.
const NEGATIVITY_TOLERANCE: f64 = 1e-9;

fn cap(rate: f64) -> f64 {
    rate.min(RATE_CAP)
}

/// Snaps a slightly negative compartment to zero or reports it, building
/// the compartment name only when the step actually fails.
fn snap_or_fail(
    value: &mut f64,
    jurisdiction: usize,
    group: RiskGroup,
    substep: u32,
    name: impl FnOnce() -> String,
) -> Result<(), SimError> {
    if *value >= -NEGATIVITY_TOLERANCE {
        *value = 0.0;
        Ok(())
    } else {
        Err(SimError::NegativeCompartment {
            jurisdiction,
            group: group.label().to_string(),
            compartment: name(),
            value: *value,
            substep,
        })
    }
}

/// Advances the system one calendar year with `substeps_per_year` Euler
/// sub-steps, returning the end-of-year state and activity tallies.
///
/// All flows within a sub-step are computed from the frozen start-of-sub-step
/// state. Rates are capped at [`RATE_CAP`] per year. A compartment driven
/// below `-1e-9` persons aborts with an error instead of being clamped.
pub fn step_year(
    state: &SystemState,
    rates: &InterventionRates,
    world: &World,
    substeps_per_year: u32,
) -> Result<(SystemState, StepOutcome), SimError> {
    let n = world.n_jurisdictions();
    let params = &world.params;
    let substeps = substeps_per_year.max(1);
    let dt = 1.0 / f64::from(substeps);

    let mut current = state.clone();
    let mut outcome = StepOutcome::zeros(n);

    // PrEP policy applies at the start of the year: coverage moves to the
    // target share of the indicated pool, never exceeding the susceptible
    // count.
    for j in 0..n {
        for k in RiskGroup::ALL {
            let target = rates.block(j, k).prep_coverage_target.clamp(0.0, 1.0);
            let block = current.block_mut(j, k);
            let indicated = params.prep_indicated_fraction * block.susceptible;
            block.on_prep = (target * indicated).min(block.susceptible);
        }
    }

    let mut pressures = vec![0.0; n * N_GROUPS];
    for substep in 0..substeps {
        for j in 0..n {
            for k in RiskGroup::ALL {
                pressures[j * N_GROUPS + k.index()] =
                    infectious_pressure(&current, params, j, k);
            }
        }
        let frozen = current.clone();
        for j in 0..n {
            let maturation = world.jurisdiction(j).maturation_in;
            for k in RiskGroup::ALL {
                let b = frozen.block(j, k);
                let r = rates.block(j, k);
                let lambda = foi_from_pressures(world, &pressures, j, k);

                let coverage = params.prep_coverage(b);
                let averted =
                    coverage * params.prep_efficacy * params.prep_infection_share;
                let infections = lambda * b.susceptible * (1.0 - averted) * dt;

                let next = current.block_mut(j, k);
                let bg = params.background_mortality;
                let mut deaths = bg * b.susceptible * dt;

                next.susceptible += maturation[k.index()] * dt
                    - infections
                    - bg * b.susceptible * dt;
                next.infected[0][0] += infections;

                let mut tests = 0.0;
                let mut mean_diag = 0.0;
                for d in 0..N_DISEASE {
                    let diag_rate = cap(r.diagnostic[d]);
                    let entry_rate = cap(r.care_entry[d]);
                    let drop_rate = cap(r.dropout[d]);
                    // The terminal stage has no successor; a nonzero rate
                    // there would leak mass out of the system.
                    let prog_rate = if d + 1 < N_DISEASE {
                        params.progression_rate[d]
                    } else {
                        0.0
                    };
                    let mort = params.stage_mortality[d] + bg;
                    mean_diag += diag_rate;

                    let unaware = b.infected[CareStage::Unaware.index()][d];
                    let aware = b.infected[CareStage::AwareNoArt.index()][d];
                    let art = b.infected[CareStage::ArtNoVls.index()][d];
                    let vls = b.infected[CareStage::ArtVls.index()][d];

                    let diagnosed = diag_rate * unaware * dt;
                    let linked = params.linkage_fraction * diagnosed;
                    let entered = entry_rate * aware * dt;
                    let suppressed = entry_rate * art * dt;
                    let dropped_art = drop_rate * art * dt;
                    let dropped_vls = drop_rate * vls * dt;

                    tests += diag_rate * unaware * dt;

                    next.infected[0][d] += -diagnosed - (prog_rate + mort) * unaware * dt;
                    next.infected[1][d] += (diagnosed - linked) + dropped_art
                        - entered
                        - (prog_rate + mort) * aware * dt;
                    next.infected[2][d] += linked + entered + dropped_vls
                        - suppressed
                        - dropped_art
                        - (prog_rate + mort) * art * dt;
                    next.infected[3][d] +=
                        suppressed - dropped_vls - (prog_rate + mort) * vls * dt;

                    if d + 1 < N_DISEASE {
                        for c in 0..4 {
                            let moved = prog_rate * b.infected[c][d] * dt;
                            next.infected[c][d + 1] += moved;
                        }
                    }
                    deaths += mort * (unaware + aware + art + vls) * dt;
                }
                next.cumulative_dead += deaths;

                // Screening of the susceptible pool at the mean diagnostic
                // rate across disease stages.
                mean_diag /= N_DISEASE as f64;
                tests += mean_diag * b.susceptible * dt;

                next.on_prep = next.on_prep.min(next.susceptible.max(0.0));

                outcome.new_infections[j * N_GROUPS + k.index()] += infections;
                outcome.tests_performed[j] += tests;
                outcome.care_person_years[j] += (b.care_stage_total(CareStage::ArtNoVls)
                    + b.care_stage_total(CareStage::ArtVls))
                    * dt;
                outcome.prep_person_years[j] += b.on_prep * dt;

                // Negativity check on everything the flows touched; the
                // compartment name is only materialized on failure so the
                // happy path stays allocation-free.
                let next = current.block_mut(j, k);
                if next.susceptible < 0.0 {
                    snap_or_fail(&mut next.susceptible, j, k, substep, || {
                        "susceptible".to_string()
                    })?;
                }
                for c in CareStage::ALL {
                    for d in 0..N_DISEASE {
                        let v = &mut next.infected[c.index()][d];
                        if *v < 0.0 {
                            snap_or_fail(v, j, k, substep, || {
                                format!("{}[{}]", c.label(), d)
                            })?;
                        }
                    }
                }
            }
        }
    }

    current.set_year(state.year() + 1);
    Ok((current, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epi::test_fixtures::*;
    use crate::epi::{CompartmentBlock, MixingMatrix, MixingWeights};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_jurisdiction_world(params: crate::epi::EpiParams) -> World {
        World::new(vec![info("A", "S1")], params, &MixingMatrix::identity()).unwrap()
    }

    fn zero_params() -> crate::epi::EpiParams {
        let mut p = flat_params();
        p.diagnostic_rate = [0.0; 5];
        p.dropout_rate = [0.0; 5];
        p.care_entry_rate = [0.0; 5];
        p.progression_rate = [0.0; 5];
        p.stage_mortality = [0.0; 5];
        p.background_mortality = 0.0;
        p.transmission_rate = [[0.0; 3]; 3];
        p
    }

    #[test]
    fn disease_free_state_changes_only_by_maturation_and_mortality() {
        let mut params = flat_params();
        params.transmission_rate = [[0.0; 3]; 3];
        let mut world = one_jurisdiction_world(params);
        world.jurisdictions[0].maturation_in = [120.0, 120.0, 60.0];

        let state = SystemState::new(
            2019,
            vec![[
                CompartmentBlock::empty(10000.0),
                CompartmentBlock::empty(10000.0),
                CompartmentBlock::empty(5000.0),
            ]],
        );
        let rates = InterventionRates::baseline(&world, &state);
        let (next, outcome) = step_year(&state, &rates, &world, 12).unwrap();

        assert_eq!(outcome.system_new_infections(), 0.0);
        assert_eq!(next.year(), 2020);
        for k in RiskGroup::ALL {
            let b = next.block(0, k);
            assert_eq!(b.pwh(), 0.0);
            // Susceptible moves only via maturation in and background
            // mortality out.
            assert!(b.susceptible > state.block(0, k).susceptible - 200.0);
            assert!(b.cumulative_dead > 0.0);
        }
    }

    #[test]
    fn single_compartment_decay_matches_hand_integration() {
        // One sub-step per year, a single unaware-acute compartment of 100
        // people, diagnosis rate 0.2, everything else zero. One Euler step:
        // unaware' = 100 - 0.2 * 100 = 80, with 80% of the 20 diagnosed
        // linked straight to ART and 20% to aware-no-ART.
        let mut params = zero_params();
        params.diagnostic_rate = [0.2; 5];
        let world = one_jurisdiction_world(params);

        let mut msm = CompartmentBlock::empty(0.0);
        msm.infected[CareStage::Unaware.index()][0] = 100.0;
        let state = SystemState::new(
            2019,
            vec![[
                CompartmentBlock::empty(0.0),
                CompartmentBlock::empty(0.0),
                msm,
            ]],
        );
        let rates = InterventionRates::baseline(&world, &state);
        let (next, outcome) = step_year(&state, &rates, &world, 1).unwrap();

        let b = next.block(0, RiskGroup::Msm);
        assert!((b.infected[CareStage::Unaware.index()][0] - 80.0).abs() < 1e-12);
        assert!((b.infected[CareStage::ArtNoVls.index()][0] - 16.0).abs() < 1e-12);
        assert!((b.infected[CareStage::AwareNoArt.index()][0] - 4.0).abs() < 1e-12);
        // 20 diagnostic tests among the unaware; no susceptibles to screen.
        assert!((outcome.tests_performed(0) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn twelve_substeps_approach_exponential_decay() {
        let mut params = zero_params();
        params.diagnostic_rate = [0.5; 5];
        let world = one_jurisdiction_world(params);
        let mut msm = CompartmentBlock::empty(0.0);
        msm.infected[CareStage::Unaware.index()][1] = 1000.0;
        let state = SystemState::new(
            2019,
            vec![[
                CompartmentBlock::empty(0.0),
                CompartmentBlock::empty(0.0),
                msm,
            ]],
        );
        let rates = InterventionRates::baseline(&world, &state);
        let (next, _) = step_year(&state, &rates, &world, 12).unwrap();
        let remaining = next.block(0, RiskGroup::Msm).infected[CareStage::Unaware.index()][1];
        let euler = 1000.0 * (1.0 - 0.5 / 12.0_f64).powi(12);
        let exact = 1000.0 * (-0.5_f64).exp();
        assert!((remaining - euler).abs() < 1e-9);
        // Sub-stepping should land near the continuous-time solution.
        assert!((remaining - exact).abs() / exact < 0.02);
    }

    #[test]
    fn conservation_holds_across_random_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = flat_params();
        let world = World::new(
            vec![info("A", "S1"), info("B", "S1")],
            params,
            &MixingMatrix {
                hm: MixingWeights {
                    same_jurisdiction: 0.57,
                    same_state_other: 0.28,
                    other_state: 0.14,
                },
                hf: MixingWeights {
                    same_jurisdiction: 0.65,
                    same_state_other: 0.23,
                    other_state: 0.12,
                },
                msm: MixingWeights {
                    same_jurisdiction: 0.47,
                    same_state_other: 0.31,
                    other_state: 0.22,
                },
            },
        )
        .unwrap();

        for _ in 0..20 {
            let mut blocks = Vec::new();
            for _ in 0..2 {
                let mut group_blocks = Vec::new();
                for _ in 0..3 {
                    let mut b = CompartmentBlock::empty(rng.gen_range(1000.0..50000.0));
                    for c in 0..4 {
                        for d in 0..5 {
                            b.infected[c][d] = rng.gen_range(0.0..200.0);
                        }
                    }
                    group_blocks.push(b);
                }
                blocks.push([
                    group_blocks[0].clone(),
                    group_blocks[1].clone(),
                    group_blocks[2].clone(),
                ]);
            }
            let state = SystemState::new(2019, blocks);
            let rates = InterventionRates::baseline(&world, &state);
            let (next, _) = step_year(&state, &rates, &world, 12).unwrap();

            let before = state.total_population();
            let after = next.total_population();
            // No maturation in this world, so totals must match exactly up
            // to float accumulation.
            assert!(
                ((after - before) / before).abs() < 1e-9,
                "conservation violated: {before} -> {after}"
            );
        }
    }

    #[test]
    fn maturation_is_the_only_external_inflow() {
        let mut world = one_jurisdiction_world(flat_params());
        world.jurisdictions[0].maturation_in = [365.0, 250.0, 80.0];
        let state = SystemState::new(
            2019,
            vec![[
                uniform_block(20000.0, 25.0),
                uniform_block(20000.0, 25.0),
                uniform_block(8000.0, 50.0),
            ]],
        );
        let rates = InterventionRates::baseline(&world, &state);
        let (next, _) = step_year(&state, &rates, &world, 12).unwrap();
        let before = state.total_population();
        let after = next.total_population();
        let expected_inflow = 365.0 + 250.0 + 80.0;
        assert!(
            ((after - before) - expected_inflow).abs() / before < 1e-9,
            "inflow mismatch: delta {}",
            after - before
        );
    }

    #[test]
    fn too_coarse_substep_reports_negative_compartment() {
        let mut params = zero_params();
        params.progression_rate = [2.0, 0.0, 0.0, 0.0, 0.0];
        params.diagnostic_rate = [0.0; 5];
        let world = one_jurisdiction_world(params);
        let mut msm = CompartmentBlock::empty(0.0);
        msm.infected[CareStage::Unaware.index()][0] = 100.0;
        let state = SystemState::new(
            2019,
            vec![[
                CompartmentBlock::empty(0.0),
                CompartmentBlock::empty(0.0),
                msm,
            ]],
        );
        // Progression at 2.0/year over a single Euler step of dt = 1 drains
        // 200 people out of a 100-person compartment.
        let rates = InterventionRates::baseline(&world, &state);
        let err = step_year(&state, &rates, &world, 1).unwrap_err();
        assert!(matches!(err, SimError::NegativeCompartment { .. }));
    }

    #[test]
    fn prep_target_sets_start_of_year_coverage() {
        let mut params = zero_params();
        params.prep_indicated_fraction = 0.1;
        let world = one_jurisdiction_world(params.clone());
        let state = SystemState::new(
            2019,
            vec![[
                CompartmentBlock::empty(10000.0),
                CompartmentBlock::empty(10000.0),
                CompartmentBlock::empty(10000.0),
            ]],
        );
        let mut rates = InterventionRates::baseline(&world, &state);
        rates.block_mut(0, RiskGroup::Msm).prep_coverage_target = 0.5;
        let (next, outcome) = step_year(&state, &rates, &world, 12).unwrap();
        let b = next.block(0, RiskGroup::Msm);
        // Indicated pool is 1000; coverage 0.5 puts 500 on PrEP and they
        // stay there all year (no mortality in these params).
        assert!((b.on_prep - 500.0).abs() < 1e-9);
        assert!((params.prep_coverage(b) - 0.5).abs() < 1e-12);
        assert!((outcome.prep_person_years(0) - 500.0).abs() < 1e-9);
    }

    #[test]
    fn prep_coverage_reduces_infections() {
        let params = flat_params();
        let world = one_jurisdiction_world(params);
        let mut msm = uniform_block(20000.0, 0.0);
        msm.infected[CareStage::Unaware.index()][1] = 2000.0;
        let state = SystemState::new(
            2019,
            vec![[
                CompartmentBlock::empty(10.0),
                CompartmentBlock::empty(10.0),
                msm,
            ]],
        );
        let baseline = InterventionRates::baseline(&world, &state);
        let (_, base_outcome) = step_year(&state, &baseline, &world, 12).unwrap();

        let mut boosted = baseline.clone();
        boosted.block_mut(0, RiskGroup::Msm).prep_coverage_target = 1.0;
        let (_, prep_outcome) = step_year(&state, &boosted, &world, 12).unwrap();

        let base_inf = base_outcome.new_infections(0, RiskGroup::Msm);
        let prep_inf = prep_outcome.new_infections(0, RiskGroup::Msm);
        assert!(base_inf > 0.0);
        // Full coverage of the indicated pool averts efficacy x share of
        // infections (0.99 * 0.5).
        assert!(prep_inf < base_inf * 0.55);
        assert!(prep_inf > base_inf * 0.45);
    }

    #[test]
    fn mixing_null_case_decouples_jurisdictions_bitwise() {
        let params = flat_params();
        let coupled_world = World::new(
            vec![info("A", "S1"), info("B", "S1")],
            params.clone(),
            &MixingMatrix::identity(),
        )
        .unwrap();
        let solo_a = World::new(vec![info("A", "S1")], params.clone(), &MixingMatrix::identity())
            .unwrap();
        let solo_b =
            World::new(vec![info("B", "S1")], params, &MixingMatrix::identity()).unwrap();

        let block_a = |scale: f64| {
            let mut b = uniform_block(15000.0 * scale, 30.0 * scale);
            b.infected[0][1] += 500.0 * scale;
            b
        };
        let blocks_a = [block_a(1.0), block_a(0.8), block_a(1.3)];
        let blocks_b = [block_a(0.4), block_a(0.5), block_a(0.2)];

        let coupled = SystemState::new(2019, vec![blocks_a.clone(), blocks_b.clone()]);
        let alone_a = SystemState::new(2019, vec![blocks_a]);
        let alone_b = SystemState::new(2019, vec![blocks_b]);

        let mut coupled_state = coupled;
        let mut state_a = alone_a;
        let mut state_b = alone_b;
        for _ in 0..12 {
            let rates_c = InterventionRates::baseline(&coupled_world, &coupled_state);
            let rates_a = InterventionRates::baseline(&solo_a, &state_a);
            let rates_b = InterventionRates::baseline(&solo_b, &state_b);
            coupled_state = step_year(&coupled_state, &rates_c, &coupled_world, 12)
                .unwrap()
                .0;
            state_a = step_year(&state_a, &rates_a, &solo_a, 12).unwrap().0;
            state_b = step_year(&state_b, &rates_b, &solo_b, 12).unwrap().0;

            for k in RiskGroup::ALL {
                assert_eq!(coupled_state.block(0, k), state_a.block(0, k));
                assert_eq!(coupled_state.block(1, k), state_b.block(0, k));
            }
        }
    }

    #[test]
    fn monotone_intervention_response() {
        // Raising any single lever must weakly reduce cumulative infections
        // over a 12-year horizon.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for trial in 0..3 {
            let params = flat_params();
            let world = one_jurisdiction_world(params);
            let mut blocks = Vec::new();
            for _ in 0..3 {
                let mut b = CompartmentBlock::empty(rng.gen_range(5000.0..40000.0));
                for c in 0..4 {
                    for d in 0..5 {
                        b.infected[c][d] = rng.gen_range(0.0..400.0);
                    }
                }
                blocks.push(b);
            }
            let state =
                SystemState::new(2019, vec![[blocks[0].clone(), blocks[1].clone(), blocks[2].clone()]]);

            let cumulative = |tweak: &dyn Fn(&mut InterventionRates)| -> f64 {
                let mut s = state.clone();
                let mut total = 0.0;
                for _ in 0..12 {
                    let mut rates = InterventionRates::baseline(&world, &s);
                    tweak(&mut rates);
                    let (next, outcome) = step_year(&s, &rates, &world, 12).unwrap();
                    total += outcome.total_new_infections(0);
                    s = next;
                }
                total
            };

            let base = cumulative(&|_| {});
            let more_testing = cumulative(&|r| {
                for k in RiskGroup::ALL {
                    for d in 0..5 {
                        r.block_mut(0, k).diagnostic[d] *= 2.0;
                    }
                }
            });
            let more_care = cumulative(&|r| {
                for k in RiskGroup::ALL {
                    for d in 0..5 {
                        r.block_mut(0, k).care_entry[d] *= 2.0;
                    }
                }
            });
            let more_prep = cumulative(&|r| {
                for k in RiskGroup::ALL {
                    r.block_mut(0, k).prep_coverage_target = 1.0;
                }
            });

            assert!(
                more_testing <= base && more_care <= base && more_prep <= base,
                "trial {trial}: base {base}, testing {more_testing}, care {more_care}, prep {more_prep}"
            );
        }
    }
}
