pub mod ir;
pub mod frontend;
pub mod domain;
pub mod datalog;
pub mod relations;
pub mod feasibility;
pub mod analysis;
pub mod oracle;
pub mod corpus;
pub mod report;
