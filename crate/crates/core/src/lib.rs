//! Multi-unit diffusion auctions over reported invitation networks.
//!
//! [`market`] validates reports and lays out the layered market,
//! [`mechanisms`] implements the auctions and [`verify`] turns their
//! properties into exhaustive checks.

pub mod fixtures;
pub mod io;
pub mod market;
pub mod mechanisms;
pub mod money;
pub mod removed;
pub mod verify;
pub mod welfare;

pub use market::{BuyerId, ReportProfile, ReportedType, ValuationVector};
pub use mechanisms::{Mechanism, MechanismKind, Outcome};
pub use money::Money;

/// Worker threads for batch work: `NETAUCTION_THREADS` when set to a
/// positive integer, otherwise the available parallelism.
pub fn worker_count() -> usize {
    std::env::var("NETAUCTION_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Maps `f` over `items` on up to [`worker_count`] threads. Output order
/// matches input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = worker_count().min(items.len());
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}
