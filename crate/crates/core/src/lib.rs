// SPDX-License-Identifier: Apache-2.0

pub mod algebra;
pub mod channels;
pub mod decomposition;
pub mod error;
pub mod io;
pub mod models;
pub mod numerics;
pub mod recurrence;
pub mod stability;

pub use error::{Error, ErrorClass, Result};
