//! rankMOS label synthesis (voting, ordering, merging) and the correlation
//! criteria used to evaluate quality models against those labels.

mod correlation;
mod table;
mod voter;

pub use correlation::{average_ranks, krocc, plcc, rmse, srocc, CorrelationReport};
pub use table::{
    merge, order, synthesize_rankmos, vote, NormScope, RankMosTable, VoteTable, RANKMOS_MAX, RANKMOS_MIN,
    TIED_RANKMOS,
};
pub use voter::{builtin_voters, PracticalityVoter, SpatialVoter, StereoVoter, Voter};
