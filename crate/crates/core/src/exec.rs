/// How a search distributes its independent work items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is on; falls back to
    /// sequential otherwise.
    #[default]
    Parallel,
}

impl Execution {
    /// Maps every item and keeps the `Some` results, in input order.
    pub fn filter_map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> Option<U> + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().filter_map(f).collect()
            }
            _ => items.iter().filter_map(f).collect(),
        }
    }

    /// Maps every item, in input order.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        self.filter_map(items, |x| Some(f(x)))
    }
}
