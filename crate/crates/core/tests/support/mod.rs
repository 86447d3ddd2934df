pub mod dp_oracle;
pub mod paths;
