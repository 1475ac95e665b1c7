#include "prvkit/model.hpp"

#include "prvkit/error.hpp"

#include <mutex>
#include <numeric>
#include <string>
#include <thread>
#include <unordered_map>

namespace prvkit
{

std::size_t ProcessModel::total_tasks() const
{
    std::size_t n = 0;
    for (const auto& app : applications)
        n += app.tasks.size();
    return n;
}

std::size_t ProcessModel::total_threads() const
{
    std::size_t n = 0;
    for (const auto& app : applications)
        for (const auto& task : app.tasks)
            n += task.threads;
    return n;
}

const TaskInfo* ProcessModel::find_task(std::uint32_t appl, std::uint32_t task) const
{
    if (appl == 0 || appl > applications.size())
        return nullptr;
    const auto& tasks = applications[appl - 1].tasks;
    if (task == 0 || task > tasks.size())
        return nullptr;
    return &tasks[task - 1];
}

std::size_t ProcessModel::global_task_index(std::uint32_t appl, std::uint32_t task) const
{
    std::size_t offset = 0;
    for (std::uint32_t a = 1; a < appl && a <= applications.size(); ++a)
        offset += applications[a - 1].tasks.size();
    return offset + task - 1;
}

bool ProcessModel::contains(std::uint32_t appl, std::uint32_t task, std::uint32_t thread) const
{
    const auto* info = find_task(appl, task);
    return info != nullptr && thread >= 1 && thread <= info->threads;
}

std::size_t ResourceModel::total_cpus() const
{
    return std::accumulate(cpus_per_node.begin(), cpus_per_node.end(), std::size_t{0});
}

void validate_models(const ProcessModel& process, const ResourceModel& resources)
{
    if (resources.cpus_per_node.empty())
        throw InvalidModelError("resource model has no nodes");
    for (std::size_t n = 0; n < resources.cpus_per_node.size(); ++n)
        if (resources.cpus_per_node[n] == 0)
            throw InvalidModelError("node " + std::to_string(n + 1) + " has zero cpus");

    if (process.applications.empty())
        throw InvalidModelError("process model has no applications");
    for (std::size_t a = 0; a < process.applications.size(); ++a)
    {
        const auto& tasks = process.applications[a].tasks;
        if (tasks.empty())
            throw InvalidModelError("application " + std::to_string(a + 1) + " has no tasks");
        for (std::size_t t = 0; t < tasks.size(); ++t)
        {
            const auto where = "task " + std::to_string(a + 1) + "." + std::to_string(t + 1);
            if (tasks[t].threads == 0)
                throw InvalidModelError(where + " has zero threads");
            if (tasks[t].node == 0 || tasks[t].node > resources.node_count())
                throw InvalidModelError(where + " references missing node " + std::to_string(tasks[t].node));
        }
    }
}

std::pair<ProcessModel, ResourceModel> build_model(std::size_t n_applications,
                                                   const std::vector<std::uint32_t>& tasks_per_application,
                                                   const std::vector<std::uint32_t>& threads_per_task,
                                                   const std::vector<std::uint32_t>& task_node_assignment,
                                                   const std::vector<std::uint32_t>& cpus_per_node)
{
    if (n_applications == 0)
        throw InvalidModelError("zero applications");
    if (tasks_per_application.size() != n_applications)
        throw InvalidModelError("tasks_per_application has " + std::to_string(tasks_per_application.size()) +
                                " entries for " + std::to_string(n_applications) + " applications");

    const auto n_tasks = std::accumulate(tasks_per_application.begin(), tasks_per_application.end(), std::size_t{0});
    if (threads_per_task.size() != n_tasks)
        throw InvalidModelError("threads_per_task does not cover every task");
    if (task_node_assignment.size() != n_tasks)
        throw InvalidModelError("task_node_assignment does not cover every task");

    ResourceModel resources{cpus_per_node};
    ProcessModel process;
    std::size_t flat = 0;
    for (auto count : tasks_per_application)
    {
        Application app;
        for (std::uint32_t t = 0; t < count; ++t, ++flat)
            app.tasks.push_back({threads_per_task[flat], task_node_assignment[flat]});
        process.applications.push_back(std::move(app));
    }

    validate_models(process, resources);
    return {std::move(process), std::move(resources)};
}

std::pair<ProcessModel, ResourceModel> single_node_model(std::uint32_t tasks, std::uint32_t threads,
                                                         std::uint32_t cpus)
{
    return build_model(1, {tasks}, std::vector<std::uint32_t>(tasks, threads), std::vector<std::uint32_t>(tasks, 1),
                       {cpus});
}

namespace
{

// Threads are numbered in the order they first ask for an id.
IdentityProvider::IdFn sequential_thread_ids()
{
    struct Registry
    {
        std::mutex mutex;
        std::unordered_map<std::thread::id, std::uint32_t> ids;
    };
    auto registry = std::make_shared<Registry>();
    return [registry]() -> std::uint32_t {
        std::lock_guard lock(registry->mutex);
        auto [it, inserted] = registry->ids.try_emplace(std::this_thread::get_id(),
                                                        static_cast<std::uint32_t>(registry->ids.size() + 1));
        return it->second;
    };
}

void require_unfrozen(const IdentityProvider& provider)
{
    if (provider.frozen())
        throw LifecycleError("identity functions cannot be remapped after tracer init");
}

} // namespace

IdentityProvider::IdentityProvider()
: task_id_fn([] { return 1u; }), thread_id_fn(sequential_thread_ids()),
  frozen_(std::make_shared<std::atomic<bool>>(false))
{
}

bool IdentityProvider::frozen() const
{
    return frozen_->load(std::memory_order_acquire);
}

void IdentityProvider::freeze() const
{
    frozen_->store(true, std::memory_order_release);
}

IdentityProvider set_taskid_function(IdentityProvider provider, IdentityProvider::IdFn task_id,
                                     IdentityProvider::IdFn num_tasks)
{
    require_unfrozen(provider);
    provider.task_id_fn = std::move(task_id);
    provider.num_tasks_fn = std::move(num_tasks);
    return provider;
}

IdentityProvider set_threadid_function(IdentityProvider provider, IdentityProvider::IdFn thread_id,
                                       IdentityProvider::IdFn num_threads)
{
    require_unfrozen(provider);
    provider.thread_id_fn = std::move(thread_id);
    provider.num_threads_fn = std::move(num_threads);
    return provider;
}

IdentityProvider distributed_provider(std::uint32_t worker, std::uint32_t workers)
{
    return set_taskid_function(
        IdentityProvider{}, [worker] { return worker; }, [workers] { return workers; });
}

Location resolve_location(const IdentityProvider& provider, const ProcessModel& process,
                          const ResourceModel& resources)
{
    Location loc;
    loc.appl = provider.application;
    loc.task = provider.task_id_fn ? provider.task_id_fn() : 1;
    loc.thread = provider.thread_id_fn ? provider.thread_id_fn() : 1;
    loc.cpu = provider.cpu_fn ? provider.cpu_fn() : 0;

    const auto* task = process.find_task(loc.appl, loc.task);
    if (process.find_task(loc.appl, 1) == nullptr)
        throw IdentityRangeError("application id " + std::to_string(loc.appl) + " outside the process model");
    if (task == nullptr)
        throw IdentityRangeError("task id " + std::to_string(loc.task) + " outside 1.." +
                                 std::to_string(process.applications[loc.appl - 1].tasks.size()));
    if (provider.num_tasks_fn && loc.task > provider.num_tasks_fn())
        throw IdentityRangeError("task id " + std::to_string(loc.task) + " exceeds numtasks " +
                                 std::to_string(provider.num_tasks_fn()));
    if (loc.thread == 0 || loc.thread > task->threads)
        throw IdentityRangeError("thread id " + std::to_string(loc.thread) + " outside 1.." +
                                 std::to_string(task->threads));
    if (provider.num_threads_fn && loc.thread > provider.num_threads_fn())
        throw IdentityRangeError("thread id " + std::to_string(loc.thread) + " exceeds numthreads " +
                                 std::to_string(provider.num_threads_fn()));
    if (loc.cpu > resources.total_cpus())
        throw IdentityRangeError("cpu " + std::to_string(loc.cpu) + " beyond " +
                                 std::to_string(resources.total_cpus()) + " cpus");
    return loc;
}

} // namespace prvkit
