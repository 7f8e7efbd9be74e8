use std::collections::BTreeMap;

use proptest::prelude::*;

use rebalplan::forex::{forex_astar, Currency, ForexTask, RateTable};
use rebalplan::format::{parse_money, ProblemFile};
use rebalplan::lp::lp_plus_plan;
use rebalplan::money::div_round_half_even;
use rebalplan::pddl::{export_problem, read_problem, PddlExportConfig};
use rebalplan::probgen::{generate_task, GeneratorConfig};
use rebalplan::search::OracleTable;
use rebalplan::statespace::{self, FeeHeuristic};
use rebalplan::{astar_fee, dfbnb, exhaustive_oracle, naive_plan, validate_plan, Bps, Money, SearchLimits, UpdateTask};

fn task(size: usize, seed: u64) -> UpdateTask {
    generate_task(&GeneratorConfig::with_size(size, seed)).expect("generator config is valid")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn half_even_is_nearest(num in -1_000_000i128..1_000_000, den in 1i128..10_000) {
        let q = div_round_half_even(num, den);
        let err = (q * den - num).abs() * 2;
        prop_assert!(err <= den);
        if err == den {
            prop_assert_eq!(q % 2, 0);
        }
    }

    #[test]
    fn money_text_round_trips(minor in -10_000_000_000i64..10_000_000_000) {
        prop_assert_eq!(parse_money(&Money(minor).to_string()), Some(Money(minor)));
    }

    #[test]
    fn variable_fee_is_between_floor_and_ceil(amount in 0i64..100_000_000, bps in 0i64..100) {
        let fee = Bps::from_integer(bps).apply(Money(amount)).0 as i128;
        let exact = amount as i128 * bps as i128;
        prop_assert!(fee * 10_000 >= exact - 10_000 && fee * 10_000 <= exact + 10_000);
    }

    #[test]
    fn astar_matches_oracle(size in 2usize..=6, seed in any::<u64>()) {
        let t = task(size, seed);
        let r = astar_fee(&t, SearchLimits::default());
        let plan = r.plan.expect("small tasks solve within budget");
        prop_assert!(validate_plan(&t, &plan).is_valid());
        let oracle = exhaustive_oracle(&t).unwrap();
        prop_assert_eq!((plan.total_cost(), plan.len()), (oracle.total_cost(), oracle.len()));
    }

    #[test]
    fn heuristic_never_overestimates_at_the_root(size in 2usize..=6, seed in any::<u64>()) {
        let t = task(size, seed);
        let s = statespace::initial_state(&t);
        let (cost, len) = OracleTable::new(&t).unwrap().completion(&s).expect("solvable");
        prop_assert!(FeeHeuristic::new(&t).h_fee(&s) <= cost);
        prop_assert!(statespace::h_count(&s) <= len);
    }

    #[test]
    fn planners_are_ordered(size in 3usize..=8, seed in any::<u64>()) {
        let t = task(size, seed);
        let a = astar_fee(&t, SearchLimits::default()).cost().unwrap();
        let d = dfbnb(&t, SearchLimits::default());
        let lp = lp_plus_plan(&t).unwrap();
        let naive = naive_plan(&t).unwrap();
        prop_assert!(validate_plan(&t, &lp).is_valid());
        prop_assert!(validate_plan(&t, &naive).is_valid());
        let d_final = d.cost().unwrap();
        let d_first = d.first_solution.unwrap().cost;
        prop_assert!(a <= d_final && d_final <= d_first && d_first <= naive.total_cost());
        if d.optimal {
            prop_assert_eq!(d_final, a);
        }
        prop_assert!(a <= lp.total_cost());
    }

    #[test]
    fn plans_replay_to_the_goal(size in 2usize..=7, seed in any::<u64>()) {
        let t = task(size, seed);
        let plan = astar_fee(&t, SearchLimits::default()).plan.unwrap();
        let mut s = statespace::initial_state(&t);
        for a in &plan.actions {
            s = statespace::apply(&s, &t, a).expect("action applies");
        }
        prop_assert!(statespace::is_goal(&s));
    }

    #[test]
    fn problem_file_round_trips(size in 2usize..=9, seed in any::<u64>()) {
        let t = task(size, seed);
        let text = ProblemFile::from_task(&t).to_toml().unwrap();
        let back = ProblemFile::parse(&text).unwrap().to_task().unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(ProblemFile::from_task(&back).to_toml().unwrap(), text);
    }

    #[test]
    fn pddl_problem_recovers_flows(size in 2usize..=9, seed in any::<u64>()) {
        let t = task(size, seed);
        let back = read_problem(&export_problem(&t, &PddlExportConfig::default()).unwrap()).unwrap();
        let outs: BTreeMap<_, _> = t.outflows().map(|(h, m)| (t.holding(h).id.clone(), m)).collect();
        let ins: BTreeMap<_, _> = t.inflows().map(|(h, m)| (t.holding(h).id.clone(), m)).collect();
        prop_assert_eq!(back.outflows, outs);
        prop_assert_eq!(back.inflows, ins);
        prop_assert_eq!(back.initial_cash, t.initial_cash());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn single_currency_forex_equals_base_search(size in 2usize..=6, seed in any::<u64>()) {
        let t = task(size, seed);
        let ft = ForexTask::new(t.clone(), Currency::new("EUR"), &BTreeMap::new(), &BTreeMap::new(), RateTable::new(), Bps::from_integer(5)).unwrap();
        prop_assert!(ft.is_single_currency());
        let fx = forex_astar(&ft, SearchLimits::default());
        let base = astar_fee(&t, SearchLimits::default());
        prop_assert_eq!(Some(fx.cost), base.cost());
        prop_assert_eq!(fx.length(), base.length());
        prop_assert_eq!(fx.exchanges(), 0);
    }

    #[test]
    fn forex_problem_file_round_trips(size in 2usize..=6, seed in any::<u64>(), usd in prop::collection::vec(any::<bool>(), 6)) {
        let t = task(size, seed);
        let currency_of = t
            .holdings()
            .iter()
            .zip(&usd)
            .filter(|(_, &u)| u)
            .map(|(h, _)| (h.id.clone(), Currency::new("USD")))
            .collect();
        let rates = RateTable::new().with("EUR", "USD", rebalplan::forex::Rate::new(5, 4)).unwrap();
        let ft = ForexTask::from_base_flows(&t, Currency::new("EUR"), &currency_of, rates, Bps::from_integer(5)).unwrap();
        let text = ProblemFile::from_forex(&ft).to_toml().unwrap();
        let back = ProblemFile::parse(&text).unwrap().to_forex().unwrap().expect("forex section");
        prop_assert_eq!(ProblemFile::from_forex(&back).to_toml().unwrap(), text);
        prop_assert_eq!(back.task(), ft.task());
    }
}
