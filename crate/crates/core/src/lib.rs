//! Downlink OTDOA positioning simulator for LTE, LTE-M and NB-IoT.

pub mod campaign;
pub mod channel;
pub mod deployment;
pub mod lpp_session;
pub mod positioner;
pub mod prs_config;
pub mod re_mapping;
pub mod receiver;
pub mod scenario;
pub mod scheduler;
