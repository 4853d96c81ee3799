use proptest::prelude::*;

use ocrsense::noise::{
    corrupt, similarity, CharConfusionTable, CorruptionConfig, LevelName, NoiseLevel,
};
use ocrsense::rng::RngState;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn variants_are_in_band_and_traceable(token in "[a-zA-Zéèà]{4,14}", seed in any::<u64>(), li in 0usize..3) {
        let table = CharConfusionTable::default();
        let level = NoiseLevel::preset(LevelName::ALL[li]);
        let mut rng = RngState::new(seed);
        let Some(c) = corrupt(&token, &level, &table, &CorruptionConfig::default(), &mut rng).unwrap() else {
            return Ok(());
        };
        let src: Vec<char> = token.chars().collect();
        let out: Vec<char> = c.variant.text.chars().collect();
        prop_assert!(level.band.contains(c.variant.sim));
        prop_assert_eq!(c.variant.sim, similarity(&token, &c.variant.text).unwrap());
        prop_assert_ne!(&c.variant.text, &token);
        prop_assert_eq!(out.len(), c.source_index.len());
        prop_assert!(c.source_index.windows(2).all(|w| w[0] < w[1]));
        for (o, &s) in out.iter().zip(&c.source_index) {
            prop_assert!(*o == src[s] || table.replacements(src[s]).contains(o));
        }
    }
}
