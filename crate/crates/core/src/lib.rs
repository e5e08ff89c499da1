pub mod bench;
pub mod cache;
pub mod cli;
pub mod crypto;
pub mod gas;
pub mod governance;
pub mod ledger;
pub mod message;
pub mod network;
pub mod pool;
pub mod protocol;
pub mod subscribe;
pub mod vm;
pub mod world;
