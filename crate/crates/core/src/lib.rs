pub mod error;
pub mod geolabel;
pub mod mapper;
pub mod metrics;
pub mod net;
pub mod numerics;
pub mod scalar;
pub mod task;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use task::{LandUse, Task};

pub type Tensor = numerics::Tensor<f64>;
pub type Network = net::Network<f64>;
pub type Sample = net::Sample<f64>;
pub type Parameter = numerics::Parameter<f64>;

pub type TensorF32 = numerics::Tensor<f32>;
pub type NetworkF32 = net::Network<f32>;
pub type SampleF32 = net::Sample<f32>;
pub type ParameterF32 = numerics::Parameter<f32>;
