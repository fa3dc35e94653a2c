/// Desk-scale size limits. Every exhaustive routine checks its input against one of these.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bounds {
    /// Largest graph accepted by `canonical_form`.
    pub canonical: usize,
    /// Largest graph accepted by exhaustive witness search.
    pub search: usize,
    /// Largest graph accepted by the cops-and-robber solver.
    pub game: usize,
    /// Largest vertex count for class enumeration.
    pub enumerate: usize,
    /// Largest graph accepted by `iso_check`.
    pub iso: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            canonical: 9,
            search: 9,
            game: 40,
            enumerate: 7,
            iso: 16,
        }
    }
}

impl Bounds {
    /// Defaults, with every bound replaced by `HOMIND_MAX_N` when that variable holds an integer.
    pub fn from_env() -> Self {
        match std::env::var("HOMIND_MAX_N").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
            Some(n) => Bounds::uniform(n),
            None => Bounds::default(),
        }
    }

    pub fn uniform(n: usize) -> Self {
        Bounds {
            canonical: n,
            search: n,
            game: n,
            enumerate: n,
            iso: n,
        }
    }
}
