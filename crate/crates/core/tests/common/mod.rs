pub mod env_checks;
