//! Doc-test shims for the guide under `book/`.
//!
//! Every code block in the guide chapters is compiled and run by
//! `cargo test --doc`, so the book cannot drift out of sync with the API.

#[cfg(doctest)]
macro_rules! chapter {
    ($name:ident, $path:literal) => {
        #[doc = include_str!($path)]
        pub struct $name;
    };
}

#[cfg(doctest)]
chapter!(Marginals, "../../../book/src/marginals.md");
#[cfg(doctest)]
chapter!(PairCopulas, "../../../book/src/pair_copulas.md");
#[cfg(doctest)]
chapter!(Vines, "../../../book/src/vines.md");
#[cfg(doctest)]
chapter!(Scenarios, "../../../book/src/scenarios.md");
#[cfg(doctest)]
chapter!(Regimes, "../../../book/src/regimes.md");
#[cfg(doctest)]
chapter!(Uncertainty, "../../../book/src/uncertainty.md");
#[cfg(doctest)]
chapter!(Studies, "../../../book/src/studies.md");
