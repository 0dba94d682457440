//! Low-rank adapters: plain LoRA (`ΔW = B·A`) and the multi-head variant
//! with one shared down-projection `A` and `N` gated up-projection heads
//! (`ΔW = (Σ ωᵢ·Bᵢ)·A`).
//!
//! Both kinds scale their update by `alpha / rank`. The delta path of the
//! forward pass is always evaluated low-rank (`A·x` first); `ΔW` is only
//! materialised by [`Adapter::delta`] and [`merge`].

mod blob;
mod gate;
mod layers;

pub use blob::{decode_blob, encode_blob, BLOB_MAGIC};
pub use gate::{gate_weights, GateMode, GateParams};
pub use layers::{
    adapted_forward, adapter_backward, merge, Adapter, AdapterGrads, AdapterKind, HydraAdapter,
    LoraAdapter,
};
