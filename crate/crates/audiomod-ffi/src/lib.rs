//! C ABI for the audiomod toolkit. Placeholder until the core lands.
